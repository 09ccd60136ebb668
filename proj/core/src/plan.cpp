#include "taiji/plan.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "taiji/common.hpp"

namespace taiji {

std::string to_string(OpKind k) {
    switch (k) {
        case OpKind::Scan: return "scan";
        case OpKind::Filter: return "filter";
        case OpKind::Project: return "project";
        case OpKind::Limit: return "limit";
        case OpKind::Join: return "join";
        case OpKind::SemMatch: return "sem_match";
        case OpKind::SemJoin: return "sem_join";
        case OpKind::SemExtract: return "sem_extract";
    }
    return "scan";
}

std::optional<OpKind> op_kind_from_string(std::string_view s) {
    static const std::pair<const char*, OpKind> table[] = {
        {"scan", OpKind::Scan},         {"filter", OpKind::Filter},
        {"project", OpKind::Project},   {"limit", OpKind::Limit},
        {"join", OpKind::Join},         {"sem_match", OpKind::SemMatch},
        {"sem_join", OpKind::SemJoin},  {"sem_extract", OpKind::SemExtract},
    };
    for (const auto& [name, k] : table) {
        if (s == name) return k;
    }
    return std::nullopt;
}

int input_arity(OpKind k) {
    switch (k) {
        case OpKind::Scan: return 0;
        case OpKind::Join:
        case OpKind::SemJoin: return 2;
        default: return 1;
    }
}

const Operator* QueryPlan::find(const std::string& id) const {
    for (const auto& [nid, op] : nodes) {
        if (nid == id) return &op;
    }
    return nullptr;
}

std::vector<std::string> QueryPlan::inputs_of(const std::string& id) const {
    std::vector<std::string> in;
    for (const auto& [from, to] : edges) {
        if (to == id) in.push_back(from);
    }
    return in;
}

std::vector<std::string> QueryPlan::outputs_of(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges) {
        if (from == id) out.push_back(to);
    }
    return out;
}

std::string QueryPlan::add_node(Operator op, std::vector<std::string> inputs) {
    std::string id = "n" + std::to_string(nodes.size() + 1);
    while (find(id)) id += "_";
    nodes.emplace_back(id, std::move(op));
    for (auto& in : inputs) edges.emplace_back(std::move(in), id);
    sink = id;
    return id;
}

ValidationReport validate_plan(const QueryPlan& plan) {
    ValidationReport report;
    auto violate = [&](std::string msg) {
        report.ok = false;
        report.violations.push_back(std::move(msg));
    };

    if (plan.nodes.empty()) {
        violate("plan has no nodes");
        return report;
    }

    std::unordered_set<std::string> ids;
    for (const auto& [id, _] : plan.nodes) {
        if (!ids.insert(id).second) violate("duplicate node id " + id);
    }
    for (const auto& [from, to] : plan.edges) {
        if (!ids.count(from)) violate("edge from unknown node " + from);
        if (!ids.count(to)) violate("edge to unknown node " + to);
        if (from == to) violate("self edge at " + from);
    }
    if (!report.ok) return report;

    for (const auto& [id, op] : plan.nodes) {
        int arity = input_arity(op.kind);
        int indeg = static_cast<int>(plan.inputs_of(id).size());
        if (indeg != arity) {
            violate("arity mismatch at node " + id + ": " + to_string(op.kind) + " expects " +
                    std::to_string(arity) + " inputs, has " + std::to_string(indeg));
        }
        switch (op.kind) {
            case OpKind::Scan:
                if (op.dataset_id.empty()) violate("scan without dataset at " + id);
                break;
            case OpKind::Filter:
                if (!op.predicate) violate("filter without predicate at " + id);
                break;
            case OpKind::Limit:
                if (op.limit < 0) violate("negative limit at " + id);
                break;
            case OpKind::SemMatch:
            case OpKind::SemJoin:
                if (op.threshold < 0.0 || op.threshold > 1.0) {
                    violate("threshold out of [0,1] at " + id);
                }
                if (op.sem_predicate.empty()) violate("empty semantic predicate at " + id);
                break;
            case OpKind::Project:
            case OpKind::SemExtract:
                if (op.columns.empty()) violate("empty column list at " + id);
                break;
            default:
                break;
        }
    }

    // Cycle detection via iterative DFS coloring.
    std::unordered_map<std::string, int> color;  // 0 white, 1 grey, 2 black
    std::string cycle_node;
    for (const auto& [start, _] : plan.nodes) {
        if (color[start]) continue;
        std::vector<std::pair<std::string, size_t>> stack{{start, 0}};
        while (!stack.empty() && cycle_node.empty()) {
            auto& [id, next] = stack.back();
            if (next == 0) color[id] = 1;
            auto outs = plan.outputs_of(id);
            if (next < outs.size()) {
                std::string succ = outs[next++];
                if (color[succ] == 1) {
                    cycle_node = succ;
                } else if (color[succ] == 0) {
                    stack.emplace_back(succ, 0);
                }
            } else {
                color[id] = 2;
                stack.pop_back();
            }
        }
        if (!cycle_node.empty()) break;
    }
    if (!cycle_node.empty()) {
        violate("cycle through " + cycle_node);
        return report;
    }

    // Exactly one sink with out-degree 0, matching the declared sink.
    std::vector<std::string> sinks;
    for (const auto& [id, _] : plan.nodes) {
        if (plan.outputs_of(id).empty()) sinks.push_back(id);
    }
    if (sinks.size() != 1) {
        violate("plan must have exactly one sink, found " + std::to_string(sinks.size()));
    } else if (plan.sink != sinks[0]) {
        violate("declared sink " + plan.sink + " is not the out-degree-0 node " + sinks[0]);
    }

    // Every node reachable from some Scan (walk up from each node).
    for (const auto& [id, _] : plan.nodes) {
        std::unordered_set<std::string> seen;
        std::vector<std::string> frontier{id};
        bool scan_found = false;
        while (!frontier.empty() && !scan_found) {
            std::string cur = frontier.back();
            frontier.pop_back();
            if (!seen.insert(cur).second) continue;
            const Operator* op = plan.find(cur);
            if (op && op->kind == OpKind::Scan) scan_found = true;
            for (auto& in : plan.inputs_of(cur)) frontier.push_back(in);
        }
        if (!scan_found) violate("node " + id + " not reachable from any scan");
    }

    return report;
}

namespace {

std::string format_threshold(double d) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    std::string s(buf, ptr);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

// Node signature computation, memoized per node.
class SignatureBuilder {
public:
    SignatureBuilder(const QueryPlan& plan, bool strip) : plan_(plan), strip_(strip) {}

    const std::string& sig(const std::string& id) {
        auto it = memo_.find(id);
        if (it != memo_.end()) return it->second;
        const Operator* op = plan_.find(id);
        if (!op) throw Error("signature of unknown node " + id);
        auto inputs = plan_.inputs_of(id);
        std::string out;
        if (inputs.empty()) {
            out = render_stage(*op, "", strip_);
        } else if (inputs.size() == 1) {
            out = sig(inputs[0]) + " | " + render_stage(*op, "", strip_);
        } else {
            out = sig(inputs[0]) + " | " + render_stage(*op, sig(inputs[1]), strip_);
        }
        return memo_.emplace(id, std::move(out)).first->second;
    }

private:
    const QueryPlan& plan_;
    bool strip_;
    std::unordered_map<std::string, std::string> memo_;
};

}  // namespace

std::string render_stage(const Operator& op, const std::string& right, bool strip) {
    auto lit = [&](const std::string& s) { return strip ? std::string("?") : s; };
    switch (op.kind) {
        case OpKind::Scan:
            return "scan(" + op.dataset_id + ")";
        case OpKind::Filter:
            return "filter(" + (strip ? render_predicate_shape(*op.predicate)
                                      : render_predicate(*op.predicate)) + ")";
        case OpKind::Project: {
            std::string out = "project(";
            for (size_t i = 0; i < op.columns.size(); ++i) {
                if (i) out += ", ";
                out += op.columns[i];
            }
            return out + ")";
        }
        case OpKind::Limit:
            return "limit(" + lit(std::to_string(op.limit)) + ")";
        case OpKind::Join:
            return "join(" + right + ", " + op.left_key + " == " + op.right_key + ")";
        case OpKind::SemMatch:
            return "sem_match(" + to_string(op.modality) + ", " + lit(quote(op.sem_predicate)) +
                   ", " + lit(format_threshold(op.threshold)) + ")";
        case OpKind::SemJoin:
            return "sem_join(" + right + ", " + op.left_key + " == " + op.right_key + ", " +
                   to_string(op.modality) + ", " + lit(quote(op.sem_predicate)) + ", " +
                   lit(format_threshold(op.threshold)) + ")";
        case OpKind::SemExtract: {
            std::string out = "sem_extract(" + to_string(op.modality);
            for (const auto& c : op.columns) out += ", " + quote(c);
            return out + ")";
        }
    }
    return "";
}

std::vector<std::string> topological_order(const QueryPlan& plan) {
    auto report = validate_plan(plan);
    if (!report.ok) {
        throw Error("topological_order on invalid plan: " + report.violations.front());
    }
    SignatureBuilder sigs(plan, false);

    std::unordered_map<std::string, int> indeg;
    for (const auto& [id, _] : plan.nodes) indeg[id] = 0;
    for (const auto& [_, to] : plan.edges) indeg[to]++;

    // Ready set ordered by (signature, id).
    auto cmp_key = [&](const std::string& id) { return std::pair(sigs.sig(id), id); };
    std::vector<std::string> ready;
    for (const auto& [id, _] : plan.nodes) {
        if (indeg[id] == 0) ready.push_back(id);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto best = std::min_element(ready.begin(), ready.end(),
                                     [&](const auto& a, const auto& b) {
                                         return cmp_key(a) < cmp_key(b);
                                     });
        std::string id = *best;
        ready.erase(best);
        order.push_back(id);
        for (const auto& succ : plan.outputs_of(id)) {
            if (--indeg[succ] == 0) ready.push_back(succ);
        }
    }
    return order;
}

std::string plan_signature(const QueryPlan& plan) {
    auto report = validate_plan(plan);
    if (!report.ok) throw Error("plan_signature on invalid plan: " + report.violations.front());
    return SignatureBuilder(plan, false).sig(plan.sink);
}

std::string intent_signature(const QueryPlan& plan) {
    auto report = validate_plan(plan);
    if (!report.ok) throw Error("intent_signature on invalid plan: " + report.violations.front());
    return SignatureBuilder(plan, true).sig(plan.sink);
}

nlohmann::json plan_to_json(const QueryPlan& plan) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [id, op] : plan.nodes) {
        nlohmann::json n{{"id", id}, {"kind", to_string(op.kind)}};
        switch (op.kind) {
            case OpKind::Scan: n["dataset"] = op.dataset_id; break;
            case OpKind::Filter: n["predicate"] = predicate_to_json(*op.predicate); break;
            case OpKind::Project: n["columns"] = op.columns; break;
            case OpKind::Limit: n["count"] = op.limit; break;
            case OpKind::Join:
                n["left_key"] = op.left_key;
                n["right_key"] = op.right_key;
                break;
            case OpKind::SemMatch:
                n["modality"] = to_string(op.modality);
                n["text"] = op.sem_predicate;
                n["threshold"] = op.threshold;
                break;
            case OpKind::SemJoin:
                n["left_key"] = op.left_key;
                n["right_key"] = op.right_key;
                n["modality"] = to_string(op.modality);
                n["text"] = op.sem_predicate;
                n["threshold"] = op.threshold;
                break;
            case OpKind::SemExtract:
                n["modality"] = to_string(op.modality);
                n["columns"] = op.columns;
                break;
        }
        nodes.push_back(std::move(n));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [from, to] : plan.edges) edges.push_back({from, to});
    return {{"nodes", nodes}, {"edges", edges}, {"sink", plan.sink}};
}

QueryPlan plan_from_json(const nlohmann::json& j) {
    QueryPlan plan;
    for (const auto& n : j.at("nodes")) {
        Operator op;
        auto kind = op_kind_from_string(n.at("kind").get<std::string>());
        if (!kind) throw Error("unknown operator kind: " + n.at("kind").get<std::string>());
        op.kind = *kind;
        switch (op.kind) {
            case OpKind::Scan: op.dataset_id = n.at("dataset").get<std::string>(); break;
            case OpKind::Filter: op.predicate = predicate_from_json(n.at("predicate")); break;
            case OpKind::Project: op.columns = n.at("columns").get<std::vector<std::string>>(); break;
            case OpKind::Limit: op.limit = n.at("count").get<int64_t>(); break;
            case OpKind::Join:
                op.left_key = n.at("left_key").get<std::string>();
                op.right_key = n.at("right_key").get<std::string>();
                break;
            case OpKind::SemMatch:
            case OpKind::SemJoin: {
                if (op.kind == OpKind::SemJoin) {
                    op.left_key = n.at("left_key").get<std::string>();
                    op.right_key = n.at("right_key").get<std::string>();
                }
                auto m = modality_from_string(n.at("modality").get<std::string>());
                if (!m) throw Error("unknown modality: " + n.at("modality").get<std::string>());
                op.modality = *m;
                op.sem_predicate = n.at("text").get<std::string>();
                op.threshold = n.at("threshold").get<double>();
                break;
            }
            case OpKind::SemExtract: {
                auto m = modality_from_string(n.at("modality").get<std::string>());
                if (!m) throw Error("unknown modality: " + n.at("modality").get<std::string>());
                op.modality = *m;
                op.columns = n.at("columns").get<std::vector<std::string>>();
                break;
            }
        }
        plan.nodes.emplace_back(n.at("id").get<std::string>(), std::move(op));
    }
    for (const auto& e : j.at("edges")) {
        plan.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    plan.sink = j.at("sink").get<std::string>();
    return plan;
}

}  // namespace taiji
