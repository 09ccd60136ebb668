#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "taiji/plan.hpp"

namespace taiji {

// Maps (operator kind, modality) pairs to servers. Entries may name an
// intermediate server that delegates to sub-servers; routing always resolves
// down the hierarchy to a leaf.
struct RoutingTable {
    std::map<std::pair<OpKind, Modality>, std::string> entries;
    // server -> children; servers absent from this map (or with no children)
    // are leaves
    std::map<std::string, std::vector<std::string>> children;
    // delegation choice at an intermediate server, by modality
    std::map<std::pair<std::string, Modality>, std::string> delegation;

    bool is_leaf(const std::string& server_id) const;
};

// Modality of each plan node: structured operators are relational, scans take
// their dataset's modality, semantic operators carry their own.
using DatasetModalityFn = std::function<Modality(const std::string& dataset_id)>;
Modality node_modality(const Operator& op, const DatasetModalityFn& dataset_modality);

// Assigns every node to a leaf server. Throws on an unroutable
// (kind, modality) pair or a broken delegation chain.
std::map<std::string, std::string> route(const QueryPlan& plan, const RoutingTable& table,
                                         const DatasetModalityFn& dataset_modality);

}  // namespace taiji
