#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/value.hpp"

namespace taiji {

// Typed predicate expression tree for Filter operators: comparisons,
// boolean connectives, and string containment over tuple cells.
struct Predicate;
using PredicatePtr = std::shared_ptr<const Predicate>;

struct Predicate {
    enum class Kind { Const, Compare, Contains, And, Or, Not };
    enum class Cmp { Eq, Ne, Lt, Le, Gt, Ge };

    struct Operand {
        bool is_column = false;
        std::string column;  // possibly qualified: "furniture.id"
        Value literal;
    };

    Kind kind = Kind::Const;
    bool const_value = true;           // Kind::Const
    Cmp cmp = Cmp::Eq;                 // Kind::Compare
    Operand lhs, rhs;                  // Compare / Contains
    std::vector<PredicatePtr> children;  // And / Or / Not

    static PredicatePtr constant(bool v);
    static PredicatePtr compare(Cmp op, Operand l, Operand r);
    static PredicatePtr contains(Operand l, Operand r);
    static PredicatePtr logical_and(std::vector<PredicatePtr> cs);
    static PredicatePtr logical_or(std::vector<PredicatePtr> cs);
    static PredicatePtr logical_not(PredicatePtr c);

    static Operand column(std::string name);
    static Operand literal(Value v);
};

// Resolves a (possibly qualified) column name to a cell value.
// Returning nullptr means the column is unknown or ambiguous.
using ColumnResolver = std::function<const Value*(std::string_view)>;

// Evaluates against a resolver. Throws Error on unknown column or on a
// type mismatch (e.g. ordering comparison between string and number).
bool eval_predicate(const Predicate& p, const ColumnResolver& resolve);

// Canonical text form; parseable by the operator-expression grammar.
std::string render_predicate(const Predicate& p);
// Same shape with every literal replaced by `?`, for intent signatures.
std::string render_predicate_shape(const Predicate& p);

// Column names referenced anywhere in the tree (for pushdown legality).
std::set<std::string> predicate_columns(const Predicate& p);

nlohmann::json predicate_to_json(const Predicate& p);
PredicatePtr predicate_from_json(const nlohmann::json& j);

}  // namespace taiji
