#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/value.hpp"

namespace taiji {

struct VectorRecord {
    std::string id;
    std::vector<float> embedding;
    std::map<std::string, Value> metadata;  // scalar attributes only
};

struct IndexParams {
    int M = 16;               // max neighbors per layer (2M at the base layer)
    int ef_construction = 128;
    int ef_search = 64;
    uint64_t seed = 42;
};

// Metadata predicate on a single attribute: equality or inclusive numeric
// range. Declared conditions get eager graph augmentation.
struct AttrCondition {
    enum class Kind { Equals, Range };

    Kind kind = Kind::Equals;
    std::string attribute;
    Value equals;
    double lo = 0.0, hi = 0.0;

    static AttrCondition eq(std::string attribute, Value v);
    static AttrCondition range(std::string attribute, double lo, double hi);

    bool matches(const VectorRecord& record) const;
    std::string key() const;  // canonical identity

    nlohmann::json to_json() const;
    static AttrCondition from_json(const nlohmann::json& j);
};

struct SearchHit {
    std::string id;
    double similarity;  // cosine, in [-1, 1]
};

// Layered proximity graph (hierarchical small-world construction) with
// condition-aware augmentation edges that keep filtered searches connected.
// Embeddings are stored L2-normalized; similarity is cosine.
class FilteredVectorIndex {
public:
    explicit FilteredVectorIndex(int dim, IndexParams params = {});

    static FilteredVectorIndex build(const std::vector<VectorRecord>& records,
                                     IndexParams params = {});

    void add(VectorRecord record);

    int dim() const { return dim_; }
    size_t size() const { return records_.size(); }
    const IndexParams& params() const { return params_; }
    const VectorRecord& record(size_t idx) const { return records_[idx]; }
    std::optional<size_t> index_of(const std::string& id) const;

    // Builds (or rebuilds) the augmentation for one declared condition:
    // near-neighbor edges within the matching subset plus bridges until the
    // induced subgraph is connected. Extra edges stay <= M * subset size.
    void augment(const AttrCondition& condition);
    // Eager equality augmentations for every distinct value of an attribute.
    void register_filterable(const std::string& attribute);
    bool has_augmentation(const AttrCondition& condition) const;
    std::vector<std::string> augmentation_keys() const;

    std::vector<SearchHit> search(std::span<const float> query, int k) const;
    // Filtered search: uses subset-restricted base edges plus augmentation
    // edges when the condition is declared; otherwise traverses the base
    // graph treating non-compliant nodes as routing-only.
    std::vector<SearchHit> search_filtered(std::span<const float> query, int k,
                                           const AttrCondition* condition) const;
    // Baseline at equal budget: unfiltered beam of ef_search, post-filtered.
    std::vector<SearchHit> search_postfilter(std::span<const float> query, int k,
                                             const AttrCondition& condition) const;
    // Exact scan; the measurement reference for recall reports.
    std::vector<SearchHit> brute_force_filtered(std::span<const float> query, int k,
                                                const AttrCondition* condition) const;

    struct StructureReport {
        bool ok = true;
        std::vector<std::string> violations;
    };
    // Degree bounds, base-layer reachability, augmentation connectivity and
    // edge budgets; exhaustive, intended for test-sized indexes.
    StructureReport check_structure() const;

    void save(const std::string& path) const;
    static FilteredVectorIndex load(const std::string& path);

private:
    struct Node {
        int level = 0;
        // adjacency per layer 0..level
        std::vector<std::vector<uint32_t>> neighbors;
    };
    struct Augmentation {
        AttrCondition condition;
        std::vector<uint32_t> subset;
        std::vector<char> member;  // size() == records_.size()
        std::map<uint32_t, std::vector<uint32_t>> extra;
        uint32_t entry = 0;
        size_t extra_edge_count = 0;  // undirected
    };

    double dot(std::span<const float> a, std::span<const float> b) const;
    double dist_to(std::span<const float> query, uint32_t idx) const;
    int sample_level();
    std::vector<uint32_t> search_layer(std::span<const float> query, uint32_t entry, int ef,
                                       int layer) const;
    std::vector<SearchHit> beam_over_subset(std::span<const float> query, int k,
                                            const Augmentation& aug) const;
    std::vector<SearchHit> beam_with_routing(std::span<const float> query, int k,
                                             const AttrCondition& condition) const;
    void connect(uint32_t idx, int layer, const std::vector<uint32_t>& candidates);
    void prune_neighbors(uint32_t idx, int layer);
    int max_degree(int layer) const { return layer == 0 ? 2 * params_.M : params_.M; }
    void rebuild_augmentations();

    int dim_;
    IndexParams params_;
    std::vector<VectorRecord> records_;  // embeddings normalized
    std::vector<Node> nodes_;
    std::map<std::string, uint32_t> by_id_;
    uint32_t entry_point_ = 0;
    int max_level_ = -1;
    uint64_t rng_state_;
    std::map<std::string, Augmentation> augmentations_;
};

struct RecallReport {
    struct PerQuery {
        double augmented_recall = 0.0;
        double baseline_recall = 0.0;
        size_t subset_size = 0;
    };
    std::vector<PerQuery> per_query;
    double mean_augmented = 0.0;
    double mean_baseline = 0.0;
};

// Recall of filtered search and of the unaugmented post-filter baseline
// against the exact scan, per query and averaged.
RecallReport recall_eval(const FilteredVectorIndex& index,
                         const std::vector<std::pair<std::vector<float>, AttrCondition>>& workload,
                         int k);

}  // namespace taiji
