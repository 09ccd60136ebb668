#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/predicate.hpp"
#include "taiji/value.hpp"

namespace taiji {

// Semantic operator hierarchy. Scan has no inputs, Join/SemJoin take two,
// everything else takes one.
enum class OpKind { Scan, Filter, Project, Limit, Join, SemMatch, SemJoin, SemExtract };

std::string to_string(OpKind k);
std::optional<OpKind> op_kind_from_string(std::string_view s);
int input_arity(OpKind k);

struct Operator {
    OpKind kind = OpKind::Scan;

    std::string dataset_id;             // Scan
    PredicatePtr predicate;             // Filter
    std::vector<std::string> columns;   // Project columns / SemExtract schema
    int64_t limit = 0;                  // Limit
    std::string left_key, right_key;    // Join / SemJoin equality pair
    Modality modality = Modality::Relational;  // SemMatch / SemJoin / SemExtract
    std::string sem_predicate;          // SemMatch / SemJoin
    double threshold = 0.5;             // SemMatch / SemJoin
};

// Directed acyclic operator graph. Edge order in `edges` fixes input order
// for binary operators (first incoming edge is the left input).
struct QueryPlan {
    std::vector<std::pair<std::string, Operator>> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::string sink;

    const Operator* find(const std::string& id) const;
    std::vector<std::string> inputs_of(const std::string& id) const;
    std::vector<std::string> outputs_of(const std::string& id) const;

    std::string add_node(Operator op, std::vector<std::string> inputs = {});
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

ValidationReport validate_plan(const QueryPlan& plan);

// Kahn order with a reproducible tie-break: lexicographic on the node's
// canonical signature, then on node id.
std::vector<std::string> topological_order(const QueryPlan& plan);

// Canonical pipeline rendering of the plan; invariant under node relabeling.
std::string plan_signature(const QueryPlan& plan);
// Signature with literals (predicates, thresholds, limits, sem predicates)
// replaced by `?`; equivalence classes of these are the refresher's intents.
std::string intent_signature(const QueryPlan& plan);

nlohmann::json plan_to_json(const QueryPlan& plan);
QueryPlan plan_from_json(const nlohmann::json& j);

// Canonical single-stage rendering used by signatures and the expression
// renderer. Binary stages embed the rendered right input.
std::string render_stage(const Operator& op, const std::string& right_input_rendering,
                         bool strip_literals = false);

}  // namespace taiji
