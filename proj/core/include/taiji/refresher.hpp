#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taiji/augmentor.hpp"
#include "taiji/common.hpp"

namespace taiji {

struct QueryLogEntry {
    int64_t timestamp_us = 0;
    std::string nl_query;
    std::string plan_signature;
    std::string intent_signature;  // plan signature with literals stripped
    bool ok = true;
    double latency_ms = 0.0;
};

nlohmann::json query_log_entry_to_json(const QueryLogEntry& e);
QueryLogEntry query_log_entry_from_json(const nlohmann::json& j);

// Append-only JSON-lines query log.
class QueryLog {
public:
    explicit QueryLog(std::string path);
    void append(const QueryLogEntry& entry);
    std::vector<QueryLogEntry> read_all() const;
    std::vector<QueryLogEntry> read_window(int64_t from_us, int64_t to_us) const;
    const std::string& path() const { return path_; }

private:
    std::string path_;
    mutable std::mutex mutex_;
};

// Intent patterns: normalized plan-shape equivalence classes with
// frequency-proportional weights summing to 1.
struct IntentWeight {
    std::string intent_signature;
    double weight = 0.0;
    int64_t count = 0;
};

std::vector<IntentWeight> analyze_intents(const std::vector<QueryLogEntry>& window);

struct RefreshSample {
    nlohmann::json input;
    nlohmann::json target;
    double weight = 1.0;
};

struct RefreshJob {
    enum class Kind { Reinforce, Insert, Unlearn };

    Kind kind = Kind::Reinforce;
    std::vector<RefreshSample> samples;
    std::string target_server;
    std::string idempotency_key;

    nlohmann::json to_json() const;
    static RefreshJob from_json(const nlohmann::json& j);
};

std::string to_string(RefreshJob::Kind k);

// Deterministic content key; identical change payloads produce identical
// keys, which is what makes redelivered notifications idempotent.
std::string job_idempotency_key(RefreshJob::Kind kind, const std::string& uri,
                                const nlohmann::json& change);

// Instruction-style samples from retained knowledge units: one sample per
// (unit, template); every prompt embeds the unit's content extract verbatim.
std::vector<RefreshSample> synthesize_insert_samples(const std::vector<KnowledgeUnit>& units);

// Closed-form ridge regression maintained through rank-one updates of the
// regularized Gram inverse. unlearn() is the exact leave-one-out downdate:
// the result equals retraining without that sample.
class RidgeScorer {
public:
    RidgeScorer(int dim, double lambda);

    void fit(std::span<const double> x, double y);
    void unlearn(std::span<const double> x, double y);
    std::vector<double> weights() const;  // (X^T X + lambda I)^-1 X^T y
    double predict(std::span<const double> x) const;

    int dim() const { return dim_; }
    double lambda() const { return lambda_; }
    int64_t sample_count() const { return count_; }

    nlohmann::json to_json() const;
    static RidgeScorer from_json(const nlohmann::json& j);

private:
    int dim_;
    double lambda_;
    std::vector<double> inv_;  // row-major dim x dim inverse of (X^T X + lambda I)
    std::vector<double> xty_;
    int64_t count_ = 0;
};

// Sample bookkeeping on top of the scorer: unlearning is only legal for
// samples that were actually fitted.
class ScorerRegistry {
public:
    ScorerRegistry(int dim, double lambda);

    void fit_sample(const std::string& id, std::vector<double> x, double y);
    void unlearn_sample(const std::string& id);
    bool has_sample(const std::string& id) const;
    const RidgeScorer& scorer() const { return scorer_; }
    std::vector<std::string> sample_ids() const;

    nlohmann::json to_json() const;
    static ScorerRegistry from_json(const nlohmann::json& j);

private:
    RidgeScorer scorer_;
    std::map<std::string, std::pair<std::vector<double>, double>> samples_;
};

// JSON-lines job outbox with set-semantics on idempotency keys.
class JobOutbox {
public:
    explicit JobOutbox(std::string path);

    bool emit(const RefreshJob& job);          // false if key already emitted
    std::vector<RefreshJob> drain();           // reads and truncates the outbox
    std::vector<RefreshJob> peek() const;
    size_t emitted_count() const { return keys_.size(); }

private:
    std::string path_;
    std::set<std::string> keys_;
    mutable std::mutex mutex_;
};

// What on_resource_change needs to build jobs out of notifications.
struct RefreshContext {
    std::set<std::string> subscribed_uris;
    std::string query_log_uri = "lake://query-log";
    std::map<std::string, std::string> uri_target_server;  // uri -> server id
    std::vector<QueryLogEntry> log_window;                 // for reinforce jobs
    std::vector<std::string> warnings;
};

// Dispatch rule per committed change kind: insert -> Insert job with
// synthesized samples, delete -> Unlearn job naming sample ids, query-log
// rollover -> Reinforce job with intent weights. Unmatched uris are ignored
// with a warning.
std::optional<RefreshJob> on_resource_change(const std::string& uri,
                                             const nlohmann::json& change, RefreshContext& ctx);

}  // namespace taiji
