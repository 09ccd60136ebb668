#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/embedder.hpp"
#include "taiji/fingerprint.hpp"
#include "taiji/value.hpp"

namespace taiji {

// One structured-text document of the local corpus (one JSON file each).
struct Document {
    std::string id;
    std::string source;
    int64_t fetched_at_us = 0;
    std::optional<int64_t> published_at_us;
    Modality modality = Modality::Text;
    std::vector<std::pair<std::string, std::string>> sections;  // heading, body

    std::string full_text() const;
    std::vector<std::string> tokens() const;
};

nlohmann::json document_to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);
// Loads every *.json document in the directory, sorted by id.
std::vector<Document> load_corpus(const std::string& dir);

struct DedupOptions {
    int shingle_n = 3;
    int permutations = 128;
    uint64_t seed = 0x5eed;
    double tau_minhash = 0.8;
    double tau_embed = 0.9;
    EmbedderOptions embedder;
    // above this corpus size embedding candidates come from the ANN index
    // (approximate); at or below it every pair is checked exactly
    size_t exact_pair_limit = 4096;
    int lsh_bands = 32;
};

struct DedupCluster {
    std::vector<std::string> member_ids;  // sorted
    std::string representative;           // earliest published_at, ties by id
};

struct DedupResult {
    std::vector<DedupCluster> clusters;                // deterministic order
    std::map<std::string, size_t> cluster_of;          // doc id -> cluster idx
};

// Connected components under edges (minhash estimate >= tau_minhash) OR
// (embedding cosine >= tau_embed). Minhash candidates come from LSH banding,
// which is lossless for tau_minhash >= 1 - bands/permutations.
DedupResult dedup(const std::vector<Document>& corpus, const DedupOptions& opts = {});

struct Entity {
    std::string name;
    std::string type;
    size_t begin = 0;  // byte span within full_text()
    size_t end = 0;

    bool operator==(const Entity&) const = default;
};

class EntityProvider {
public:
    virtual ~EntityProvider() = default;
    virtual std::vector<Entity> extract(const Document& doc) = 0;
};

// Deterministic longest-match dictionary matcher over word boundaries.
class GazetteerMatcher : public EntityProvider {
public:
    explicit GazetteerMatcher(std::map<std::string, std::string> name_to_type);
    std::vector<Entity> extract(const Document& doc) override;

private:
    std::map<std::string, std::string> entries_;
    size_t max_words_ = 1;
};

struct KnowledgeUnit {
    enum class Status { Candidate, Retained, Rejected };

    std::string id;
    std::string content;  // content extract
    std::vector<Entity> entities;
    std::set<std::string> sources;
    Modality modality = Modality::Text;
    double credibility = 0.5;
    std::optional<int64_t> published_at_us;
    int64_t fetched_at_us = 0;
    Status status = Status::Candidate;
};

nlohmann::json knowledge_unit_to_json(const KnowledgeUnit& u);
KnowledgeUnit knowledge_unit_from_json(const nlohmann::json& j);

// Symmetric source-pair relation ("related" = same origin/mirror). Pairs not
// listed are unrelated. This is explicit configuration, never inferred.
class SourceRelationMap {
public:
    SourceRelationMap() = default;
    void mark_related(const std::string& a, const std::string& b);
    bool related(const std::string& a, const std::string& b) const;

    static SourceRelationMap from_json(const nlohmann::json& j);  // {"related_pairs": [[a,b]]}

private:
    std::set<std::pair<std::string, std::string>> related_;
};

// Retained iff at least two of the unit's sources are mutually unrelated.
KnowledgeUnit::Status corroborate(const KnowledgeUnit& unit, const SourceRelationMap& relations);

struct KnowledgeQuery {
    std::optional<Modality> modality;
    double min_credibility = 0.0;
    std::optional<int64_t> window_from_us;  // inclusive, on published/fetched time
    std::optional<int64_t> window_to_us;    // exclusive
    double decay_lambda = 0.0;              // per day
    int64_t now_us = 0;
};

// Catalog of retained units, queryable by modality/credibility/time window,
// ordered by credibility x exp(-lambda * age_days).
class KnowledgeCatalog {
public:
    void add(KnowledgeUnit unit);  // rejects non-retained units
    size_t size() const { return units_.size(); }
    const std::vector<KnowledgeUnit>& units() const { return units_; }

    std::vector<KnowledgeUnit> query(const KnowledgeQuery& q) const;

    void save_jsonl(const std::string& path) const;
    size_t load_jsonl(const std::string& path);

private:
    std::vector<KnowledgeUnit> units_;
};

struct AugmentorConfig {
    DedupOptions dedup;
    std::map<std::string, std::string> gazetteer;
    SourceRelationMap relations;
    std::map<std::string, double> source_credibility;  // absent -> 0.5
    size_t content_extract_chars = 500;
};

AugmentorConfig augmentor_config_from_json(const nlohmann::json& j);

struct AugmentReport {
    size_t documents = 0;
    size_t clusters = 0;
    size_t retained = 0;
    size_t rejected = 0;

    nlohmann::json to_json() const;
};

// Full enrichment pass: dedup -> entity extraction -> corroboration ->
// catalog indexing. Returns the retained units alongside counters.
AugmentReport run_augment_pipeline(const std::vector<Document>& corpus,
                                   const AugmentorConfig& config, KnowledgeCatalog& catalog);

}  // namespace taiji
