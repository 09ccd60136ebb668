#include "taiji/planner.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>

#include "taiji/common.hpp"

namespace taiji {

nlohmann::json cost_profile_to_json(const CostProfile& p) {
    return {{"op", p.operator_signature},
            {"sample_size", p.sample_size},
            {"selectivity", p.selectivity},
            {"per_tuple_latency_us", p.per_tuple_latency_us},
            {"measured_at_us", p.measured_at_us}};
}

CostProfile cost_profile_from_json(const nlohmann::json& j) {
    CostProfile p;
    p.operator_signature = j.at("op").get<std::string>();
    p.sample_size = j.at("sample_size").get<int64_t>();
    p.selectivity = j.at("selectivity").get<double>();
    p.per_tuple_latency_us = j.at("per_tuple_latency_us").get<double>();
    p.measured_at_us = j.at("measured_at_us").get<int64_t>();
    if (p.sample_size < 1) throw Error("cost profile sample_size must be >= 1");
    if (p.selectivity < 0.0 || p.selectivity > 1.0) throw Error("selectivity out of [0,1]");
    if (p.per_tuple_latency_us < 0.0) throw Error("negative per-tuple latency");
    return p;
}

std::string operator_signature(const Operator& op) { return render_stage(op, "?"); }

CostModel::CostModel(CostModelOptions opts, std::function<int64_t()> now)
    : opts_(std::move(opts)), now_(now ? std::move(now) : [] { return now_micros(); }) {}

void CostModel::insert(CostProfile profile) {
    std::unique_lock lock(mutex_);
    profiles_[profile.operator_signature] = std::move(profile);
}

bool CostModel::has_fresh(const std::string& op_signature) const {
    std::shared_lock lock(mutex_);
    auto it = profiles_.find(op_signature);
    return it != profiles_.end() &&
           now_() - it->second.measured_at_us <= opts_.profile_ttl_us;
}

CostProfile CostModel::lookup(const std::string& op_signature) const {
    {
        std::shared_lock lock(mutex_);
        auto it = profiles_.find(op_signature);
        if (it != profiles_.end() &&
            now_() - it->second.measured_at_us <= opts_.profile_ttl_us) {
            return it->second;
        }
    }
    CostProfile def = opts_.default_profile;
    def.operator_signature = op_signature;
    return def;
}

void CostModel::save_jsonl(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path);
    if (!out) throw Error("cannot write profiles to " + path);
    for (const auto& [_, p] : profiles_) out << cost_profile_to_json(p).dump() << "\n";
}

size_t CostModel::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        insert(cost_profile_from_json(nlohmann::json::parse(line)));
        ++n;
    }
    return n;
}

CostProfile sample_operator(const Operator& op, const ResultSet& sample,
                            const SampleExecutor& executor, std::function<int64_t()> now) {
    if (sample.tuples.empty()) throw Error("sample_operator needs k >= 1 tuples");
    const auto k = static_cast<double>(sample.tuples.size());

    auto start = Clock::now();
    ResultSet out = executor(op, sample);
    auto wall_us = std::chrono::duration_cast<Micros>(Clock::now() - start).count();

    CostProfile p;
    p.operator_signature = operator_signature(op);
    p.sample_size = static_cast<int64_t>(sample.tuples.size());
    p.selectivity = (static_cast<double>(out.tuples.size()) + 1.0) / (k + 2.0);
    p.per_tuple_latency_us = static_cast<double>(wall_us) / k;
    p.measured_at_us = now ? now() : now_micros();
    return p;
}

PlanCostEstimate estimate_cost(const QueryPlan& plan, const CostModel& model,
                               const std::map<std::string, double>& base_cardinalities) {
    PlanCostEstimate est;
    est.plan = plan;

    std::map<std::string, double> out_card;
    for (const auto& id : topological_order(plan)) {
        const Operator& op = *plan.find(id);
        auto inputs = plan.inputs_of(id);
        CostProfile profile = model.lookup(operator_signature(op));

        double input_card = 0.0;
        double output_card = 0.0;
        switch (op.kind) {
            case OpKind::Scan: {
                auto it = base_cardinalities.find(op.dataset_id);
                if (it == base_cardinalities.end()) {
                    throw Error("no base cardinality for dataset " + op.dataset_id);
                }
                input_card = it->second;
                output_card = input_card;
                break;
            }
            case OpKind::Filter:
            case OpKind::SemMatch:
                input_card = out_card.at(inputs[0]);
                output_card = input_card * profile.selectivity;
                break;
            case OpKind::Project:
            case OpKind::SemExtract:
                input_card = out_card.at(inputs[0]);
                output_card = input_card;
                break;
            case OpKind::Limit:
                input_card = out_card.at(inputs[0]);
                output_card = std::min(input_card, static_cast<double>(op.limit));
                break;
            case OpKind::Join:
            case OpKind::SemJoin: {
                double left = out_card.at(inputs[0]);
                double right = out_card.at(inputs[1]);
                input_card = left + right;
                double sel = model.has_fresh(operator_signature(op))
                                 ? profile.selectivity
                                 : model.options().default_join_selectivity;
                output_card = left * right * sel;
                break;
            }
        }
        double latency = input_card * profile.per_tuple_latency_us;
        est.per_node[id] = {input_card, latency};
        est.total_latency_us += latency;
        out_card[id] = output_card;
    }
    return est;
}

namespace {

bool is_commuting_predicate(const Operator& op) {
    return op.kind == OpKind::Filter || op.kind == OpKind::SemMatch;
}

// Maximal chains of consecutive commuting predicate nodes. A chain member
// must have exactly one consumer so reordering cannot change any other
// branch's input.
std::vector<std::vector<std::string>> find_chains(const QueryPlan& plan) {
    std::vector<std::vector<std::string>> chains;
    std::set<std::string> used;
    for (const auto& id : topological_order(plan)) {
        if (used.count(id)) continue;
        const Operator* op = plan.find(id);
        if (!is_commuting_predicate(*op)) continue;
        std::vector<std::string> chain{id};
        used.insert(id);
        std::string cur = id;
        while (true) {
            auto outs = plan.outputs_of(cur);
            if (outs.size() != 1) break;
            const Operator* next = plan.find(outs[0]);
            if (!is_commuting_predicate(*next)) break;
            if (plan.outputs_of(outs[0]).size() > 1) {
                chain.push_back(outs[0]);
                used.insert(outs[0]);
                break;
            }
            chain.push_back(outs[0]);
            used.insert(outs[0]);
            cur = outs[0];
        }
        if (chain.size() >= 2) chains.push_back(std::move(chain));
    }
    return chains;
}

// Rewires a chain (contiguous unary segment) to a new operator order. Only
// edges move; node ids keep their operators.
QueryPlan reorder_chain(const QueryPlan& plan, const std::vector<std::string>& chain,
                        const std::vector<std::string>& new_order) {
    QueryPlan out = plan;
    std::string below = plan.inputs_of(chain.front()).at(0);
    auto consumers = plan.outputs_of(chain.back());

    // Drop all edges touching chain interiors.
    std::set<std::string> members(chain.begin(), chain.end());
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& [from, to] : out.edges) {
        bool chain_edge = members.count(to) || (members.count(from) && !consumers.empty() &&
                                                std::find(consumers.begin(), consumers.end(),
                                                          to) != consumers.end());
        if (!chain_edge) edges.push_back({from, to});
    }
    std::string cur = below;
    for (const auto& id : new_order) {
        edges.push_back({cur, id});
        cur = id;
    }
    for (const auto& consumer : consumers) edges.push_back({cur, consumer});
    out.edges = std::move(edges);
    if (consumers.empty()) out.sink = cur;
    return out;
}

// Dataset ids scanned in the subtree rooted at `id`.
std::set<std::string> subtree_datasets(const QueryPlan& plan, const std::string& id) {
    std::set<std::string> out;
    std::vector<std::string> stack{id};
    std::set<std::string> seen;
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        if (!seen.insert(cur).second) continue;
        const Operator* op = plan.find(cur);
        if (op->kind == OpKind::Scan) out.insert(op->dataset_id);
        for (const auto& in : plan.inputs_of(cur)) stack.push_back(in);
    }
    return out;
}

// True when every qualified column the predicate references belongs to a
// dataset scanned on that side. Unqualified columns are never pushable.
bool pushable_to(const QueryPlan& plan, const std::string& side_root, const Predicate& pred) {
    auto cols = predicate_columns(pred);
    if (cols.empty()) return false;
    auto datasets = subtree_datasets(plan, side_root);
    for (const auto& c : cols) {
        auto dot = c.find('.');
        if (dot == std::string::npos) return false;
        if (!datasets.count(c.substr(0, dot))) return false;
    }
    return true;
}

// Pushes filters sitting directly above a join below the side their columns
// belong to, repeating until no filter moves.
QueryPlan push_down_filters(const QueryPlan& plan) {
    QueryPlan cur = plan;
    bool moved = true;
    while (moved) {
        moved = false;
        for (const auto& [id, op] : cur.nodes) {
            if (op.kind != OpKind::Filter) continue;
            auto inputs = cur.inputs_of(id);
            if (inputs.size() != 1) continue;
            const Operator* below = cur.find(inputs[0]);
            if (below->kind != OpKind::Join && below->kind != OpKind::SemJoin) continue;
            if (cur.outputs_of(inputs[0]).size() != 1) continue;
            auto join_inputs = cur.inputs_of(inputs[0]);
            int side = -1;
            if (pushable_to(cur, join_inputs[0], *op.predicate)) side = 0;
            else if (pushable_to(cur, join_inputs[1], *op.predicate)) side = 1;
            if (side < 0) continue;

            // Splice the filter out from above the join and in above the
            // chosen join input.
            QueryPlan next = cur;
            std::string join_id = inputs[0];
            std::string target = join_inputs[static_cast<size_t>(side)];
            auto filter_consumers = cur.outputs_of(id);
            std::vector<std::pair<std::string, std::string>> edges;
            for (const auto& [from, to] : next.edges) {
                if (to == id && from == join_id) continue;              // join -> filter
                if (from == id) continue;                               // filter -> consumer
                if (to == join_id && from == target) continue;          // target -> join
                edges.push_back({from, to});
            }
            edges.push_back({target, id});
            edges.push_back({id, join_id});
            for (const auto& c : filter_consumers) edges.push_back({join_id, c});
            next.edges = std::move(edges);
            if (next.sink == id) next.sink = join_id;
            if (!validate_plan(next).ok) continue;
            cur = std::move(next);
            moved = true;
            break;
        }
    }
    return cur;
}

// Greedy chain order: drop the most selective-per-cost predicate first,
// i.e. descending (1 - selectivity) / per-tuple latency.
std::vector<std::string> greedy_order(const QueryPlan& plan, const std::vector<std::string>& chain,
                                      const CostModel& model) {
    std::vector<std::string> order = chain;
    auto rank = [&](const std::string& id) {
        CostProfile p = model.lookup(operator_signature(*plan.find(id)));
        double lat = std::max(p.per_tuple_latency_us, 1e-9);
        return (1.0 - p.selectivity) / lat;
    };
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return rank(a) > rank(b);
    });
    return order;
}

constexpr size_t kMaxExhaustiveChain = 6;
constexpr size_t kMaxCandidates = 5000;

void permute_chains(const QueryPlan& base, const std::vector<std::vector<std::string>>& chains,
                    size_t idx, std::vector<QueryPlan>& out) {
    if (out.size() >= kMaxCandidates) return;
    if (idx == chains.size()) {
        out.push_back(base);
        return;
    }
    std::vector<std::string> order = chains[idx];
    std::sort(order.begin(), order.end());
    do {
        permute_chains(reorder_chain(base, chains[idx], order), chains, idx + 1, out);
        if (out.size() >= kMaxCandidates) return;
    } while (std::next_permutation(order.begin(), order.end()));
}

}  // namespace

std::vector<QueryPlan> enumerate_candidates(const QueryPlan& plan, const CostModel* model) {
    auto report = validate_plan(plan);
    if (!report.ok) throw Error("enumerate_candidates on invalid plan: " + report.violations[0]);

    std::vector<QueryPlan> variants{plan};
    QueryPlan pushed = push_down_filters(plan);
    if (plan_signature(pushed) != plan_signature(plan)) variants.push_back(pushed);

    std::vector<QueryPlan> candidates;
    CostModel neutral_model;
    const CostModel& greedy_model = model ? *model : neutral_model;
    for (const auto& variant : variants) {
        auto chains = find_chains(variant);
        bool all_small = std::all_of(chains.begin(), chains.end(), [](const auto& c) {
            return c.size() <= kMaxExhaustiveChain;
        });
        if (all_small) {
            permute_chains(variant, chains, 0, candidates);
        } else {
            candidates.push_back(variant);
            QueryPlan greedy = variant;
            for (const auto& chain : chains) {
                greedy = reorder_chain(greedy, chain, greedy_order(greedy, chain, greedy_model));
            }
            candidates.push_back(std::move(greedy));
        }
    }

    // Dedup by signature, keep deterministic order.
    std::vector<QueryPlan> unique;
    std::set<std::string> seen;
    for (auto& c : candidates) {
        auto sig = plan_signature(c);
        if (seen.insert(sig).second) unique.push_back(std::move(c));
    }
    return unique;
}

std::optional<PlannerResult> PlanCache::get(const std::string& input_signature) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(input_signature);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void PlanCache::put(const std::string& input_signature, PlannerResult result) {
    std::unique_lock lock(mutex_);
    entries_[input_signature] = std::move(result);
}

PlannerResult choose_plan(const QueryPlan& plan, const CostModel& model,
                          const std::map<std::string, double>& base_cardinalities,
                          PlanCache* cache) {
    std::string input_sig = plan_signature(plan);
    if (cache) {
        if (auto hit = cache->get(input_sig)) return *hit;
    }

    PlannerResult best;
    bool first = true;
    std::string best_sig;
    for (const auto& candidate : enumerate_candidates(plan, &model)) {
        PlanCostEstimate est = estimate_cost(candidate, model, base_cardinalities);
        std::string sig = plan_signature(candidate);
        bool better = first || est.total_latency_us < best.estimate.total_latency_us ||
                      (est.total_latency_us == best.estimate.total_latency_us && sig < best_sig);
        if (better) {
            best.plan = candidate;
            best.estimate = std::move(est);
            best_sig = sig;
            first = false;
        }
    }
    if (cache) cache->put(input_sig, best);
    return best;
}

}  // namespace taiji
