#include "taiji/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <queue>
#include <set>

#include "taiji/common.hpp"
#include "taiji/embedder.hpp"
#include "taiji/result_set.hpp"

namespace taiji {

AttrCondition AttrCondition::eq(std::string attribute, Value v) {
    AttrCondition c;
    c.kind = Kind::Equals;
    c.attribute = std::move(attribute);
    c.equals = std::move(v);
    return c;
}

AttrCondition AttrCondition::range(std::string attribute, double lo, double hi) {
    AttrCondition c;
    c.kind = Kind::Range;
    c.attribute = std::move(attribute);
    c.lo = lo;
    c.hi = hi;
    return c;
}

bool AttrCondition::matches(const VectorRecord& record) const {
    auto it = record.metadata.find(attribute);
    if (it == record.metadata.end()) return false;
    if (kind == Kind::Equals) return value_equal(it->second, equals);
    double v;
    if (const auto* i = std::get_if<int64_t>(&it->second)) {
        v = static_cast<double>(*i);
    } else if (const auto* d = std::get_if<double>(&it->second)) {
        v = *d;
    } else {
        return false;
    }
    return v >= lo && v <= hi;
}

std::string AttrCondition::key() const {
    if (kind == Kind::Equals) return attribute + "==" + value_to_string(equals);
    return attribute + " in [" + std::to_string(lo) + "," + std::to_string(hi) + "]";
}

nlohmann::json AttrCondition::to_json() const {
    if (kind == Kind::Equals) {
        return {{"attr", attribute}, {"op", "eq"}, {"value", value_to_json(equals)}};
    }
    return {{"attr", attribute}, {"op", "range"}, {"lo", lo}, {"hi", hi}};
}

AttrCondition AttrCondition::from_json(const nlohmann::json& j) {
    std::string op = j.at("op").get<std::string>();
    if (op == "eq") return eq(j.at("attr").get<std::string>(), value_from_json(j.at("value")));
    if (op == "range") {
        return range(j.at("attr").get<std::string>(), j.at("lo").get<double>(),
                     j.at("hi").get<double>());
    }
    throw Error("unknown condition op: " + op);
}

FilteredVectorIndex::FilteredVectorIndex(int dim, IndexParams params)
    : dim_(dim), params_(params), rng_state_(splitmix64(params.seed ^ 0x9e3779b9)) {
    if (dim_ < 1) throw Error("index dimension must be >= 1");
    if (params_.M < 2) throw Error("M must be >= 2");
}

FilteredVectorIndex FilteredVectorIndex::build(const std::vector<VectorRecord>& records,
                                               IndexParams params) {
    if (records.empty()) throw Error("build needs at least one record");
    FilteredVectorIndex index(static_cast<int>(records.front().embedding.size()), params);
    for (const auto& r : records) index.add(r);
    return index;
}

double FilteredVectorIndex::dot(std::span<const float> a, std::span<const float> b) const {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double FilteredVectorIndex::dist_to(std::span<const float> query, uint32_t idx) const {
    return 1.0 - dot(query, records_[idx].embedding);
}

namespace {
// similarity clamped to cosine range; float dots can stray past 1 by an ulp
double to_similarity(double dist) { return std::clamp(1.0 - dist, -1.0, 1.0); }
}  // namespace

int FilteredVectorIndex::sample_level() {
    // standard exponential level assignment with mL = 1/ln(M)
    rng_state_ = splitmix64(rng_state_);
    double u = static_cast<double>(rng_state_ >> 11) / static_cast<double>(1ull << 53);
    u = std::max(u, 1e-12);
    double ml = 1.0 / std::log(static_cast<double>(params_.M));
    return static_cast<int>(-std::log(u) * ml);
}

void FilteredVectorIndex::add(VectorRecord record) {
    if (static_cast<int>(record.embedding.size()) != dim_) {
        throw Error("dimension mismatch for record " + record.id);
    }
    if (by_id_.count(record.id)) throw Error("duplicate id " + record.id);
    l2_normalize(record.embedding);

    uint32_t idx = static_cast<uint32_t>(records_.size());
    int level = sample_level();
    records_.push_back(std::move(record));
    Node node;
    node.level = level;
    node.neighbors.resize(static_cast<size_t>(level) + 1);
    nodes_.push_back(std::move(node));
    by_id_[records_[idx].id] = idx;

    if (idx == 0) {
        entry_point_ = 0;
        max_level_ = level;
        return;
    }

    std::span<const float> query(records_[idx].embedding);
    uint32_t cur = entry_point_;
    // greedy descent through layers above the node's level
    for (int layer = max_level_; layer > level; --layer) {
        bool improved = true;
        while (improved) {
            improved = false;
            double best = dist_to(query, cur);
            for (uint32_t n : nodes_[cur].neighbors[static_cast<size_t>(layer)]) {
                double d = dist_to(query, n);
                if (d < best) {
                    best = d;
                    cur = n;
                    improved = true;
                }
            }
        }
    }
    for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
        auto candidates = search_layer(query, cur, params_.ef_construction, layer);
        connect(idx, layer, candidates);
        if (!candidates.empty()) cur = candidates.front();
    }
    if (level > max_level_) {
        max_level_ = level;
        entry_point_ = idx;
    }
    if (!augmentations_.empty()) rebuild_augmentations();
}

// Best-first beam over one layer; returns up to ef nodes sorted by distance.
std::vector<uint32_t> FilteredVectorIndex::search_layer(std::span<const float> query,
                                                        uint32_t entry, int ef,
                                                        int layer) const {
    using Entry = std::pair<double, uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> candidates;
    std::priority_queue<Entry> best;  // max-heap: worst of the ef best on top
    std::set<uint32_t> visited;

    double d0 = dist_to(query, entry);
    candidates.emplace(d0, entry);
    best.emplace(d0, entry);
    visited.insert(entry);

    while (!candidates.empty()) {
        auto [d, u] = candidates.top();
        candidates.pop();
        if (d > best.top().first && static_cast<int>(best.size()) >= ef) break;
        if (static_cast<size_t>(layer) >= nodes_[u].neighbors.size()) continue;
        for (uint32_t v : nodes_[u].neighbors[static_cast<size_t>(layer)]) {
            if (!visited.insert(v).second) continue;
            double dv = dist_to(query, v);
            if (static_cast<int>(best.size()) < ef || dv < best.top().first) {
                candidates.emplace(dv, v);
                best.emplace(dv, v);
                while (static_cast<int>(best.size()) > ef) best.pop();
            }
        }
    }
    std::vector<Entry> sorted;
    while (!best.empty()) {
        sorted.push_back(best.top());
        best.pop();
    }
    std::sort(sorted.begin(), sorted.end());
    std::vector<uint32_t> out;
    out.reserve(sorted.size());
    for (const auto& [d, u] : sorted) out.push_back(u);
    return out;
}

void FilteredVectorIndex::connect(uint32_t idx, int layer,
                                  const std::vector<uint32_t>& candidates) {
    int m = max_degree(layer);
    std::span<const float> query(records_[idx].embedding);
    size_t take = std::min<size_t>(candidates.size(), static_cast<size_t>(m));
    auto& mine = nodes_[idx].neighbors[static_cast<size_t>(layer)];
    for (size_t i = 0; i < take; ++i) {
        uint32_t n = candidates[i];
        if (n == idx) continue;
        mine.push_back(n);
        auto& theirs = nodes_[n].neighbors[static_cast<size_t>(layer)];
        theirs.push_back(idx);
        if (static_cast<int>(theirs.size()) > max_degree(layer)) prune_neighbors(n, layer);
    }
    (void)query;
}

void FilteredVectorIndex::prune_neighbors(uint32_t idx, int layer) {
    auto& list = nodes_[idx].neighbors[static_cast<size_t>(layer)];
    std::span<const float> self(records_[idx].embedding);
    std::vector<std::pair<double, uint32_t>> scored;
    scored.reserve(list.size());
    for (uint32_t n : list) scored.emplace_back(dist_to(self, n), n);
    std::sort(scored.begin(), scored.end());
    scored.resize(static_cast<size_t>(max_degree(layer)));
    list.clear();
    for (const auto& [d, n] : scored) list.push_back(n);
}

std::vector<SearchHit> FilteredVectorIndex::search(std::span<const float> query, int k) const {
    if (records_.empty() || k < 1) return {};
    std::vector<float> q(query.begin(), query.end());
    l2_normalize(q);
    uint32_t cur = entry_point_;
    for (int layer = max_level_; layer > 0; --layer) {
        bool improved = true;
        while (improved) {
            improved = false;
            double best = dist_to(q, cur);
            for (uint32_t n : nodes_[cur].neighbors[static_cast<size_t>(layer)]) {
                double d = dist_to(q, n);
                if (d < best) {
                    best = d;
                    cur = n;
                    improved = true;
                }
            }
        }
    }
    auto found = search_layer(q, cur, std::max(params_.ef_search, k), 0);
    std::vector<SearchHit> hits;
    for (size_t i = 0; i < found.size() && static_cast<int>(hits.size()) < k; ++i) {
        hits.push_back({records_[found[i]].id, to_similarity(dist_to(q, found[i]))});
    }
    return hits;
}

void FilteredVectorIndex::augment(const AttrCondition& condition) {
    Augmentation aug;
    aug.condition = condition;
    aug.member.assign(records_.size(), 0);
    for (uint32_t i = 0; i < records_.size(); ++i) {
        if (condition.matches(records_[i])) {
            aug.subset.push_back(i);
            aug.member[i] = 1;
        }
    }
    if (aug.subset.empty()) {
        augmentations_[condition.key()] = std::move(aug);
        return;
    }

    const size_t n = aug.subset.size();
    const size_t knn = std::min<size_t>(static_cast<size_t>(params_.M) - 1, n - 1);

    // near-neighbor edges within the subset
    std::set<std::pair<uint32_t, uint32_t>> edges;
    for (uint32_t u : aug.subset) {
        std::span<const float> qu(records_[u].embedding);
        std::vector<std::pair<double, uint32_t>> scored;
        scored.reserve(n - 1);
        for (uint32_t v : aug.subset) {
            if (v == u) continue;
            scored.emplace_back(dist_to(qu, v), v);
        }
        std::partial_sort(scored.begin(),
                          scored.begin() + static_cast<long>(std::min(knn, scored.size())),
                          scored.end());
        for (size_t i = 0; i < std::min(knn, scored.size()); ++i) {
            uint32_t v = scored[i].second;
            edges.emplace(std::min(u, v), std::max(u, v));
        }
    }

    // union-find over (base edges restricted to subset) + extra edges
    std::vector<uint32_t> parent(records_.size());
    for (uint32_t i = 0; i < parent.size(); ++i) parent[i] = i;
    std::function<uint32_t(uint32_t)> find = [&](uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](uint32_t a, uint32_t b) { parent[find(a)] = find(b); };

    for (uint32_t u : aug.subset) {
        for (uint32_t v : nodes_[u].neighbors[0]) {
            if (aug.member[v]) unite(u, v);
        }
    }
    for (const auto& [u, v] : edges) unite(u, v);

    // bridge remaining components via nearest cross-component pairs
    while (true) {
        std::map<uint32_t, std::vector<uint32_t>> components;
        for (uint32_t u : aug.subset) components[find(u)].push_back(u);
        if (components.size() <= 1) break;
        auto first = components.begin();
        double best_d = std::numeric_limits<double>::infinity();
        std::pair<uint32_t, uint32_t> best_pair{0, 0};
        for (uint32_t u : first->second) {
            std::span<const float> qu(records_[u].embedding);
            for (uint32_t v : aug.subset) {
                if (find(v) == first->first) continue;
                double d = dist_to(qu, v);
                if (d < best_d) {
                    best_d = d;
                    best_pair = {u, v};
                }
            }
        }
        edges.emplace(std::min(best_pair.first, best_pair.second),
                      std::max(best_pair.first, best_pair.second));
        unite(best_pair.first, best_pair.second);
    }

    for (const auto& [u, v] : edges) {
        aug.extra[u].push_back(v);
        aug.extra[v].push_back(u);
    }
    for (auto& [_, list] : aug.extra) std::sort(list.begin(), list.end());
    aug.extra_edge_count = edges.size();

    // entry: subset node nearest to the global entry point
    std::span<const float> eq(records_[entry_point_].embedding);
    double best = std::numeric_limits<double>::infinity();
    for (uint32_t u : aug.subset) {
        double d = dist_to(eq, u);
        if (d < best) {
            best = d;
            aug.entry = u;
        }
    }

    augmentations_[condition.key()] = std::move(aug);
}

void FilteredVectorIndex::register_filterable(const std::string& attribute) {
    std::set<std::string> seen;
    std::vector<AttrCondition> todo;
    for (const auto& r : records_) {
        auto it = r.metadata.find(attribute);
        if (it == r.metadata.end()) continue;
        AttrCondition c = AttrCondition::eq(attribute, it->second);
        if (seen.insert(c.key()).second) todo.push_back(std::move(c));
    }
    for (const auto& c : todo) augment(c);
}

bool FilteredVectorIndex::has_augmentation(const AttrCondition& condition) const {
    return augmentations_.count(condition.key()) > 0;
}

std::vector<std::string> FilteredVectorIndex::augmentation_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : augmentations_) out.push_back(k);
    return out;
}

void FilteredVectorIndex::rebuild_augmentations() {
    std::vector<AttrCondition> conditions;
    conditions.reserve(augmentations_.size());
    for (const auto& [_, aug] : augmentations_) conditions.push_back(aug.condition);
    augmentations_.clear();
    for (const auto& c : conditions) augment(c);
}

std::vector<SearchHit> FilteredVectorIndex::beam_over_subset(std::span<const float> query, int k,
                                                             const Augmentation& aug) const {
    if (aug.subset.empty()) return {};
    int ef = std::max(params_.ef_search, k);
    using Entry = std::pair<double, uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> candidates;
    std::priority_queue<Entry> best;
    std::set<uint32_t> visited;

    double d0 = dist_to(query, aug.entry);
    candidates.emplace(d0, aug.entry);
    best.emplace(d0, aug.entry);
    visited.insert(aug.entry);

    auto push = [&](uint32_t v) {
        if (!visited.insert(v).second) return;
        double dv = dist_to(query, v);
        if (static_cast<int>(best.size()) < ef || dv < best.top().first) {
            candidates.emplace(dv, v);
            best.emplace(dv, v);
            while (static_cast<int>(best.size()) > ef) best.pop();
        }
    };

    while (!candidates.empty()) {
        auto [d, u] = candidates.top();
        candidates.pop();
        if (d > best.top().first && static_cast<int>(best.size()) >= ef) break;
        for (uint32_t v : nodes_[u].neighbors[0]) {
            if (aug.member[v]) push(v);
        }
        auto it = aug.extra.find(u);
        if (it != aug.extra.end()) {
            for (uint32_t v : it->second) push(v);
        }
    }

    std::vector<Entry> sorted;
    while (!best.empty()) {
        sorted.push_back(best.top());
        best.pop();
    }
    std::sort(sorted.begin(), sorted.end());
    std::vector<SearchHit> hits;
    for (size_t i = 0; i < sorted.size() && static_cast<int>(hits.size()) < k; ++i) {
        hits.push_back({records_[sorted[i].second].id, to_similarity(sorted[i].first)});
    }
    return hits;
}

std::vector<SearchHit> FilteredVectorIndex::beam_with_routing(std::span<const float> query, int k,
                                                              const AttrCondition& condition) const {
    // Base-graph beam from the global entry; non-compliant nodes route but
    // never enter the result set.
    int ef = std::max(params_.ef_search, k);
    auto found = search_layer(query, entry_point_, ef, 0);
    std::vector<SearchHit> hits;
    for (uint32_t u : found) {
        if (!condition.matches(records_[u])) continue;
        hits.push_back({records_[u].id, to_similarity(dist_to(query, u))});
        if (static_cast<int>(hits.size()) >= k) break;
    }
    return hits;
}

std::vector<SearchHit> FilteredVectorIndex::search_filtered(std::span<const float> query, int k,
                                                            const AttrCondition* condition) const {
    if (records_.empty() || k < 1) return {};
    if (!condition) return search(query, k);
    std::vector<float> q(query.begin(), query.end());
    l2_normalize(q);
    auto it = augmentations_.find(condition->key());
    if (it != augmentations_.end()) return beam_over_subset(q, k, it->second);
    return beam_with_routing(q, k, *condition);
}

std::vector<SearchHit> FilteredVectorIndex::search_postfilter(std::span<const float> query, int k,
                                                              const AttrCondition& condition) const {
    if (records_.empty() || k < 1) return {};
    std::vector<float> q(query.begin(), query.end());
    l2_normalize(q);
    uint32_t cur = entry_point_;
    for (int layer = max_level_; layer > 0; --layer) {
        bool improved = true;
        while (improved) {
            improved = false;
            double best = dist_to(q, cur);
            for (uint32_t n : nodes_[cur].neighbors[static_cast<size_t>(layer)]) {
                double d = dist_to(q, n);
                if (d < best) {
                    best = d;
                    cur = n;
                    improved = true;
                }
            }
        }
    }
    auto found = search_layer(q, cur, std::max(params_.ef_search, k), 0);
    std::vector<SearchHit> hits;
    for (uint32_t u : found) {
        if (!condition.matches(records_[u])) continue;
        hits.push_back({records_[u].id, to_similarity(dist_to(q, u))});
        if (static_cast<int>(hits.size()) >= k) break;
    }
    return hits;
}

std::vector<SearchHit> FilteredVectorIndex::brute_force_filtered(
    std::span<const float> query, int k, const AttrCondition* condition) const {
    std::vector<float> q(query.begin(), query.end());
    l2_normalize(q);
    std::vector<std::pair<double, uint32_t>> scored;
    for (uint32_t i = 0; i < records_.size(); ++i) {
        if (condition && !condition->matches(records_[i])) continue;
        scored.emplace_back(dist_to(q, i), i);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<SearchHit> hits;
    for (size_t i = 0; i < scored.size() && static_cast<int>(hits.size()) < k; ++i) {
        hits.push_back({records_[scored[i].second].id, to_similarity(scored[i].first)});
    }
    return hits;
}

std::optional<size_t> FilteredVectorIndex::index_of(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

FilteredVectorIndex::StructureReport FilteredVectorIndex::check_structure() const {
    StructureReport report;
    auto violate = [&](std::string v) {
        report.ok = false;
        report.violations.push_back(std::move(v));
    };

    for (uint32_t i = 0; i < nodes_.size(); ++i) {
        for (size_t layer = 0; layer < nodes_[i].neighbors.size(); ++layer) {
            int limit = max_degree(static_cast<int>(layer));
            if (static_cast<int>(nodes_[i].neighbors[layer].size()) > limit) {
                violate("degree bound exceeded at node " + std::to_string(i) + " layer " +
                        std::to_string(layer));
            }
        }
    }

    // every node reachable from the entry point at the base layer
    if (!records_.empty()) {
        std::vector<char> seen(records_.size(), 0);
        std::vector<uint32_t> stack{entry_point_};
        seen[entry_point_] = 1;
        size_t count = 0;
        while (!stack.empty()) {
            uint32_t u = stack.back();
            stack.pop_back();
            count++;
            for (uint32_t v : nodes_[u].neighbors[0]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        if (count != records_.size()) {
            violate("base layer not fully reachable from entry: " + std::to_string(count) + "/" +
                    std::to_string(records_.size()));
        }
    }

    for (const auto& [key, aug] : augmentations_) {
        if (aug.subset.empty()) continue;
        if (aug.extra_edge_count > static_cast<size_t>(params_.M) * aug.subset.size()) {
            violate("augmentation edge budget exceeded for " + key);
        }
        for (const auto& [u, list] : aug.extra) {
            if (!aug.member[u]) violate("augmentation edge from non-member in " + key);
            for (uint32_t v : list) {
                if (!aug.member[v]) violate("augmentation edge to non-member in " + key);
            }
        }
        // connectivity of (restricted base + extra)
        std::set<uint32_t> seen;
        std::vector<uint32_t> stack{aug.subset.front()};
        seen.insert(aug.subset.front());
        while (!stack.empty()) {
            uint32_t u = stack.back();
            stack.pop_back();
            auto push = [&](uint32_t v) {
                if (aug.member[v] && seen.insert(v).second) stack.push_back(v);
            };
            for (uint32_t v : nodes_[u].neighbors[0]) push(v);
            auto it = aug.extra.find(u);
            if (it != aug.extra.end()) {
                for (uint32_t v : it->second) push(v);
            }
        }
        if (seen.size() != aug.subset.size()) {
            violate("augmented subgraph disconnected for " + key + ": " +
                    std::to_string(seen.size()) + "/" + std::to_string(aug.subset.size()));
        }
    }
    return report;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<long>(s.size()));
}

std::string read_string(std::ifstream& in) {
    auto n = read_pod<uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

constexpr uint32_t kMagic = 0x544a5658;  // "TJVX"
constexpr uint32_t kVersion = 1;

}  // namespace

void FilteredVectorIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write index to " + path);
    write_pod(out, kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<int32_t>(dim_));
    write_pod(out, static_cast<int32_t>(params_.M));
    write_pod(out, static_cast<int32_t>(params_.ef_construction));
    write_pod(out, static_cast<int32_t>(params_.ef_search));
    write_pod(out, params_.seed);
    write_pod(out, rng_state_);
    write_pod(out, static_cast<uint64_t>(records_.size()));
    write_pod(out, entry_point_);
    write_pod(out, static_cast<int32_t>(max_level_));

    for (const auto& r : records_) {
        write_string(out, r.id);
        out.write(reinterpret_cast<const char*>(r.embedding.data()),
                  static_cast<long>(sizeof(float) * r.embedding.size()));
        write_pod(out, static_cast<uint32_t>(r.metadata.size()));
        for (const auto& [k, v] : r.metadata) {
            write_string(out, k);
            write_string(out, nlohmann::json(value_to_json(v)).dump());
        }
    }
    for (const auto& n : nodes_) {
        write_pod(out, static_cast<int32_t>(n.level));
        for (const auto& layer : n.neighbors) {
            write_pod(out, static_cast<uint32_t>(layer.size()));
            for (uint32_t v : layer) write_pod(out, v);
        }
    }
    write_pod(out, static_cast<uint32_t>(augmentations_.size()));
    for (const auto& [key, aug] : augmentations_) {
        write_string(out, aug.condition.to_json().dump());
        write_pod(out, aug.entry);
        write_pod(out, static_cast<uint64_t>(aug.extra_edge_count));
        write_pod(out, static_cast<uint32_t>(aug.subset.size()));
        for (uint32_t v : aug.subset) write_pod(out, v);
        write_pod(out, static_cast<uint32_t>(aug.extra.size()));
        for (const auto& [u, list] : aug.extra) {
            write_pod(out, u);
            write_pod(out, static_cast<uint32_t>(list.size()));
            for (uint32_t v : list) write_pod(out, v);
        }
    }
}

FilteredVectorIndex FilteredVectorIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read index from " + path);
    if (read_pod<uint32_t>(in) != kMagic) throw Error("bad index magic in " + path);
    if (read_pod<uint32_t>(in) != kVersion) throw Error("unsupported index version in " + path);
    int dim = read_pod<int32_t>(in);
    IndexParams params;
    params.M = read_pod<int32_t>(in);
    params.ef_construction = read_pod<int32_t>(in);
    params.ef_search = read_pod<int32_t>(in);
    params.seed = read_pod<uint64_t>(in);

    FilteredVectorIndex index(dim, params);
    index.rng_state_ = read_pod<uint64_t>(in);
    auto count = read_pod<uint64_t>(in);
    index.entry_point_ = read_pod<uint32_t>(in);
    index.max_level_ = read_pod<int32_t>(in);

    for (uint64_t i = 0; i < count; ++i) {
        VectorRecord r;
        r.id = read_string(in);
        r.embedding.resize(static_cast<size_t>(dim));
        in.read(reinterpret_cast<char*>(r.embedding.data()),
                static_cast<long>(sizeof(float) * r.embedding.size()));
        auto meta = read_pod<uint32_t>(in);
        for (uint32_t m = 0; m < meta; ++m) {
            std::string k = read_string(in);
            r.metadata[k] = value_from_json(nlohmann::json::parse(read_string(in)));
        }
        index.by_id_[r.id] = static_cast<uint32_t>(i);
        index.records_.push_back(std::move(r));
    }
    for (uint64_t i = 0; i < count; ++i) {
        Node n;
        n.level = read_pod<int32_t>(in);
        n.neighbors.resize(static_cast<size_t>(n.level) + 1);
        for (auto& layer : n.neighbors) {
            auto sz = read_pod<uint32_t>(in);
            layer.resize(sz);
            for (auto& v : layer) v = read_pod<uint32_t>(in);
        }
        index.nodes_.push_back(std::move(n));
    }
    auto naug = read_pod<uint32_t>(in);
    for (uint32_t a = 0; a < naug; ++a) {
        Augmentation aug;
        aug.condition = AttrCondition::from_json(nlohmann::json::parse(read_string(in)));
        aug.entry = read_pod<uint32_t>(in);
        aug.extra_edge_count = read_pod<uint64_t>(in);
        auto subset_size = read_pod<uint32_t>(in);
        aug.subset.resize(subset_size);
        aug.member.assign(count, 0);
        for (auto& v : aug.subset) {
            v = read_pod<uint32_t>(in);
            aug.member[v] = 1;
        }
        auto extra_nodes = read_pod<uint32_t>(in);
        for (uint32_t e = 0; e < extra_nodes; ++e) {
            uint32_t u = read_pod<uint32_t>(in);
            auto sz = read_pod<uint32_t>(in);
            auto& list = aug.extra[u];
            list.resize(sz);
            for (auto& v : list) v = read_pod<uint32_t>(in);
        }
        index.augmentations_[aug.condition.key()] = std::move(aug);
    }
    if (!in) throw Error("truncated index file " + path);
    return index;
}

RecallReport recall_eval(const FilteredVectorIndex& index,
                         const std::vector<std::pair<std::vector<float>, AttrCondition>>& workload,
                         int k) {
    if (workload.empty()) throw Error("recall_eval needs a non-empty workload");
    RecallReport report;
    auto overlap = [](const std::vector<SearchHit>& got, const std::vector<SearchHit>& truth) {
        if (truth.empty()) return 1.0;
        std::set<std::string> t;
        for (const auto& h : truth) t.insert(h.id);
        size_t hit = 0;
        for (const auto& h : got) hit += t.count(h.id);
        return static_cast<double>(hit) / static_cast<double>(t.size());
    };
    for (const auto& [query, condition] : workload) {
        auto truth = index.brute_force_filtered(query, k, &condition);
        auto augmented = index.search_filtered(query, k, &condition);
        auto baseline = index.search_postfilter(query, k, condition);
        RecallReport::PerQuery pq;
        pq.augmented_recall = overlap(augmented, truth);
        pq.baseline_recall = overlap(baseline, truth);
        report.per_query.push_back(pq);
        report.mean_augmented += pq.augmented_recall;
        report.mean_baseline += pq.baseline_recall;
    }
    report.mean_augmented /= static_cast<double>(report.per_query.size());
    report.mean_baseline /= static_cast<double>(report.per_query.size());
    return report;
}

}  // namespace taiji
