#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "taiji/common.hpp"

namespace taiji {

// Data modalities a dataset (and any item reference) can carry.
enum class Modality { Relational, SemiStructured, Text, Image, Vector };

std::string to_string(Modality m);
std::optional<Modality> modality_from_string(std::string_view s);

// Reference to an item of some modality living in a lake dataset.
struct ItemRef {
    std::string dataset_id;
    std::string item_id;
    Modality modality = Modality::Relational;

    bool operator==(const ItemRef&) const = default;
    auto operator<=>(const ItemRef&) const = default;
};

// Cell value: scalar, null, or a cross-modal item reference. Structured
// records travel as ItemRef plus sibling scalar cells rather than nesting.
using Value = std::variant<std::monostate, int64_t, double, bool, std::string, ItemRef>;

std::string value_to_string(const Value& v);
bool value_less(const Value& a, const Value& b);
bool value_equal(const Value& a, const Value& b);

// Semantic column types for structured datasets.
enum class ColumnType { Int, Float, String, Bool, ItemRefType };

std::string to_string(ColumnType t);
std::optional<ColumnType> column_type_from_string(std::string_view s);

struct DatasetRef {
    std::string id;
    Modality modality = Modality::Relational;
    std::string uri;
    std::vector<std::pair<std::string, ColumnType>> schema;  // empty for unstructured
};

}  // namespace taiji
