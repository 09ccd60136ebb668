#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/value.hpp"

namespace taiji {

struct ResultTuple {
    std::vector<std::pair<std::string, Value>> cells;

    const Value* find(std::string_view name) const;
    // Resolves names like "price" against qualified cells like "furniture.price".
    // Exact match wins; otherwise a unique ".name" suffix match is accepted.
    const Value* resolve(std::string_view name) const;
    bool operator==(const ResultTuple&) const = default;
};

struct ResultSet {
    std::vector<std::string> columns;
    std::vector<ResultTuple> tuples;
    std::string provenance;  // originating plan signature, if any

    size_t size() const { return tuples.size(); }
    bool empty() const { return tuples.empty(); }
    ResultTuple& emplace_row();
};

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

nlohmann::json result_set_to_json(const ResultSet& rs);
ResultSet result_set_from_json(const nlohmann::json& j);

// Canonical one-line rendering of a tuple, used for multiset comparisons.
std::string tuple_to_string(const ResultTuple& t);

}  // namespace taiji
