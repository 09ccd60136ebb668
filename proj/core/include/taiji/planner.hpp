#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "taiji/plan.hpp"
#include "taiji/result_set.hpp"

namespace taiji {

// Per-operator runtime statistics collected on samples.
struct CostProfile {
    std::string operator_signature;
    int64_t sample_size = 1;
    double selectivity = 0.5;          // in [0,1], Laplace-smoothed
    double per_tuple_latency_us = 0.0;
    int64_t measured_at_us = 0;        // epoch micros
};

nlohmann::json cost_profile_to_json(const CostProfile& p);
CostProfile cost_profile_from_json(const nlohmann::json& j);

// Stage rendering without input context; the profile cache key.
std::string operator_signature(const Operator& op);

struct CostModelOptions {
    CostProfile default_profile{"", 1, 0.5, 100.0, 0};
    double default_join_selectivity = 0.1;
    int64_t profile_ttl_us = 10ll * 60 * 1000 * 1000;  // 10 minutes
};

// Profile store: concurrent reads, serialized writes, TTL-based staleness.
// Lookups never fail; unseen or stale operators fall back to the default.
class CostModel {
public:
    explicit CostModel(CostModelOptions opts = {},
                       std::function<int64_t()> now = nullptr);

    void insert(CostProfile profile);
    CostProfile lookup(const std::string& op_signature) const;
    bool has_fresh(const std::string& op_signature) const;
    const CostModelOptions& options() const { return opts_; }

    // JSON-lines persistence, one profile per line, for warm starts.
    void save_jsonl(const std::string& path) const;
    size_t load_jsonl(const std::string& path);  // returns profiles loaded

private:
    CostModelOptions opts_;
    std::function<int64_t()> now_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, CostProfile> profiles_;
};

// Runs one operator over a sample result set; returns the operator's output.
using SampleExecutor = std::function<ResultSet(const Operator&, const ResultSet& sample)>;

// Measures selectivity and per-tuple latency of `op` on a k-tuple sample.
// Selectivity is Laplace-smoothed: (passed + 1) / (k + 2), never exactly 0/1.
CostProfile sample_operator(const Operator& op, const ResultSet& sample,
                            const SampleExecutor& executor,
                            std::function<int64_t()> now = nullptr);

struct PlanCostEstimate {
    QueryPlan plan;
    double total_latency_us = 0.0;
    // node id -> (input cardinality, node latency in micros)
    std::map<std::string, std::pair<double, double>> per_node;
};

// Cardinalities propagate in topological order under the independence
// assumption; node latency = input cardinality x per-tuple latency.
PlanCostEstimate estimate_cost(const QueryPlan& plan, const CostModel& model,
                               const std::map<std::string, double>& base_cardinalities);

// Semantically equivalent rewrites: permutations of maximal chains of
// commuting unary predicate operators (Filter/SemMatch), plus predicate
// pushdown below joins where the predicate provably references one side.
// Chains longer than 6 get a single greedy ordering (descending
// (1 - selectivity) / per-tuple-latency under `model`) instead of
// permutations.
std::vector<QueryPlan> enumerate_candidates(const QueryPlan& plan,
                                            const CostModel* model = nullptr);

struct PlannerResult {
    QueryPlan plan;
    PlanCostEstimate estimate;
};

class PlanCache {
public:
    std::optional<PlannerResult> get(const std::string& input_signature) const;
    void put(const std::string& input_signature, PlannerResult result);

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, PlannerResult> entries_;
};

// Minimum estimated latency over enumerate_candidates; ties broken by
// canonical signature order.
PlannerResult choose_plan(const QueryPlan& plan, const CostModel& model,
                          const std::map<std::string, double>& base_cardinalities,
                          PlanCache* cache = nullptr);

}  // namespace taiji
