#include "taiji/routing.hpp"

#include "taiji/common.hpp"

namespace taiji {

bool RoutingTable::is_leaf(const std::string& server_id) const {
    auto it = children.find(server_id);
    return it == children.end() || it->second.empty();
}

Modality node_modality(const Operator& op, const DatasetModalityFn& dataset_modality) {
    switch (op.kind) {
        case OpKind::Scan:
            return dataset_modality ? dataset_modality(op.dataset_id) : Modality::Relational;
        case OpKind::SemMatch:
        case OpKind::SemJoin:
        case OpKind::SemExtract:
            return op.modality;
        default:
            return Modality::Relational;
    }
}

std::map<std::string, std::string> route(const QueryPlan& plan, const RoutingTable& table,
                                         const DatasetModalityFn& dataset_modality) {
    auto report = validate_plan(plan);
    if (!report.ok) throw Error("route on invalid plan: " + report.violations.front());

    std::map<std::string, std::string> assignment;
    for (const auto& [id, op] : plan.nodes) {
        Modality m = node_modality(op, dataset_modality);
        auto it = table.entries.find({op.kind, m});
        if (it == table.entries.end()) {
            throw Error("unroutable operator: " + to_string(op.kind) + " on " + to_string(m));
        }
        std::string server = it->second;
        // Walk delegation down to a leaf; bail out on a cycle-sized walk.
        size_t hops = 0;
        while (!table.is_leaf(server)) {
            auto del = table.delegation.find({server, m});
            if (del == table.delegation.end()) {
                throw Error("server " + server + " has no delegate for " + to_string(m));
            }
            server = del->second;
            if (++hops > table.children.size() + 1) {
                throw Error("delegation loop at server " + server);
            }
        }
        assignment[id] = server;
    }
    return assignment;
}

}  // namespace taiji
