#include "taiji/refresher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace taiji {

nlohmann::json query_log_entry_to_json(const QueryLogEntry& e) {
    return {{"timestamp_us", e.timestamp_us}, {"nl_query", e.nl_query},
            {"plan_signature", e.plan_signature}, {"intent_signature", e.intent_signature},
            {"outcome", e.ok ? "ok" : "error"},  {"latency_ms", e.latency_ms}};
}

QueryLogEntry query_log_entry_from_json(const nlohmann::json& j) {
    QueryLogEntry e;
    e.timestamp_us = j.at("timestamp_us").get<int64_t>();
    e.nl_query = j.value("nl_query", "");
    e.plan_signature = j.value("plan_signature", "");
    e.intent_signature = j.value("intent_signature", "");
    e.ok = j.value("outcome", "ok") == "ok";
    e.latency_ms = j.value("latency_ms", 0.0);
    return e;
}

QueryLog::QueryLog(std::string path) : path_(std::move(path)) {}

void QueryLog::append(const QueryLogEntry& entry) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to query log " + path_);
    out << query_log_entry_to_json(entry).dump() << "\n";
}

std::vector<QueryLogEntry> QueryLog::read_all() const {
    std::lock_guard lock(mutex_);
    std::vector<QueryLogEntry> out;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(query_log_entry_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

std::vector<QueryLogEntry> QueryLog::read_window(int64_t from_us, int64_t to_us) const {
    std::vector<QueryLogEntry> out;
    for (auto& e : read_all()) {
        if (e.timestamp_us >= from_us && e.timestamp_us < to_us) out.push_back(std::move(e));
    }
    return out;
}

std::vector<IntentWeight> analyze_intents(const std::vector<QueryLogEntry>& window) {
    std::map<std::string, int64_t> counts;
    for (const auto& e : window) counts[e.intent_signature]++;
    std::vector<IntentWeight> out;
    int64_t total = static_cast<int64_t>(window.size());
    if (total == 0) return out;
    for (const auto& [intent, count] : counts) {
        out.push_back({intent, static_cast<double>(count) / static_cast<double>(total), count});
    }
    std::sort(out.begin(), out.end(), [](const IntentWeight& a, const IntentWeight& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.intent_signature < b.intent_signature;
    });
    return out;
}

std::string to_string(RefreshJob::Kind k) {
    switch (k) {
        case RefreshJob::Kind::Reinforce: return "reinforce";
        case RefreshJob::Kind::Insert: return "insert";
        case RefreshJob::Kind::Unlearn: return "unlearn";
    }
    return "?";
}

nlohmann::json RefreshJob::to_json() const {
    nlohmann::json samples_json = nlohmann::json::array();
    for (const auto& s : samples) {
        samples_json.push_back({{"input", s.input}, {"target", s.target}, {"weight", s.weight}});
    }
    return {{"kind", to_string(kind)},
            {"samples", samples_json},
            {"target_server", target_server},
            {"idempotency_key", idempotency_key}};
}

RefreshJob RefreshJob::from_json(const nlohmann::json& j) {
    RefreshJob job;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "reinforce") job.kind = Kind::Reinforce;
    else if (kind == "insert") job.kind = Kind::Insert;
    else if (kind == "unlearn") job.kind = Kind::Unlearn;
    else throw Error("unknown job kind " + kind);
    for (const auto& s : j.at("samples")) {
        RefreshSample sample;
        sample.input = s.at("input");
        sample.target = s.value("target", nlohmann::json());
        sample.weight = s.value("weight", 1.0);
        if (sample.weight < 0) throw Error("negative sample weight");
        job.samples.push_back(std::move(sample));
    }
    job.target_server = j.value("target_server", "");
    job.idempotency_key = j.value("idempotency_key", "");
    return job;
}

std::string job_idempotency_key(RefreshJob::Kind kind, const std::string& uri,
                                const nlohmann::json& change) {
    nlohmann::json canonical{{"kind", to_string(kind)}, {"uri", uri}, {"change", change}};
    return "job-" + to_hex(stable_hash(canonical.dump()));
}

std::vector<RefreshSample> synthesize_insert_samples(const std::vector<KnowledgeUnit>& units) {
    std::vector<RefreshSample> samples;
    for (const auto& unit : units) {
        if (unit.status != KnowledgeUnit::Status::Retained) {
            throw Error("insert samples come from retained units only: " + unit.id);
        }
        RefreshSample restate;
        restate.input = "Restate the key fact in the passage below.\n" + unit.content;
        restate.target = unit.content;
        samples.push_back(std::move(restate));

        RefreshSample entities;
        entities.input = "List the named entities mentioned in the passage below.\n" + unit.content;
        std::string listing;
        for (const auto& e : unit.entities) {
            if (!listing.empty()) listing += ", ";
            listing += e.name + " (" + e.type + ")";
        }
        entities.target = listing.empty() ? "none" : listing;
        samples.push_back(std::move(entities));
    }
    return samples;
}

RidgeScorer::RidgeScorer(int dim, double lambda) : dim_(dim), lambda_(lambda) {
    if (dim_ < 1) throw Error("scorer dimension must be >= 1");
    if (lambda_ <= 0) throw Error("ridge lambda must be > 0");
    inv_.assign(static_cast<size_t>(dim_) * dim_, 0.0);
    xty_.assign(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        inv_[static_cast<size_t>(i) * dim_ + i] = 1.0 / lambda_;  // (lambda I)^-1
    }
}

void RidgeScorer::fit(std::span<const double> x, double y) {
    if (static_cast<int>(x.size()) != dim_) throw Error("sample dimension mismatch");
    // Sherman-Morrison update: A^-1 -= (A^-1 x)(x^T A^-1) / (1 + x^T A^-1 x)
    std::vector<double> ax(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        double s = 0;
        for (int j = 0; j < dim_; ++j) s += inv_[static_cast<size_t>(i) * dim_ + j] * x[static_cast<size_t>(j)];
        ax[static_cast<size_t>(i)] = s;
    }
    double denom = 1.0;
    for (int i = 0; i < dim_; ++i) denom += x[static_cast<size_t>(i)] * ax[static_cast<size_t>(i)];
    for (int i = 0; i < dim_; ++i) {
        for (int j = 0; j < dim_; ++j) {
            inv_[static_cast<size_t>(i) * dim_ + j] -=
                ax[static_cast<size_t>(i)] * ax[static_cast<size_t>(j)] / denom;
        }
    }
    for (int i = 0; i < dim_; ++i) xty_[static_cast<size_t>(i)] += y * x[static_cast<size_t>(i)];
    count_++;
}

void RidgeScorer::unlearn(std::span<const double> x, double y) {
    if (static_cast<int>(x.size()) != dim_) throw Error("sample dimension mismatch");
    if (count_ < 1) throw Error("unlearn on an empty scorer");
    // Rank-one downdate: A^-1 += (A^-1 x)(x^T A^-1) / (1 - x^T A^-1 x)
    std::vector<double> ax(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        double s = 0;
        for (int j = 0; j < dim_; ++j) s += inv_[static_cast<size_t>(i) * dim_ + j] * x[static_cast<size_t>(j)];
        ax[static_cast<size_t>(i)] = s;
    }
    double xax = 0;
    for (int i = 0; i < dim_; ++i) xax += x[static_cast<size_t>(i)] * ax[static_cast<size_t>(i)];
    double denom = 1.0 - xax;
    if (std::abs(denom) < 1e-12) {
        throw Error("downdate singularity; sample cannot be removed");
    }
    for (int i = 0; i < dim_; ++i) {
        for (int j = 0; j < dim_; ++j) {
            inv_[static_cast<size_t>(i) * dim_ + j] +=
                ax[static_cast<size_t>(i)] * ax[static_cast<size_t>(j)] / denom;
        }
    }
    for (int i = 0; i < dim_; ++i) xty_[static_cast<size_t>(i)] -= y * x[static_cast<size_t>(i)];
    count_--;
}

std::vector<double> RidgeScorer::weights() const {
    std::vector<double> w(static_cast<size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        double s = 0;
        for (int j = 0; j < dim_; ++j) s += inv_[static_cast<size_t>(i) * dim_ + j] * xty_[static_cast<size_t>(j)];
        w[static_cast<size_t>(i)] = s;
    }
    return w;
}

double RidgeScorer::predict(std::span<const double> x) const {
    auto w = weights();
    double s = 0;
    for (int i = 0; i < dim_; ++i) s += w[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
    return s;
}

nlohmann::json RidgeScorer::to_json() const {
    return {{"dim", dim_}, {"lambda", lambda_}, {"inv", inv_}, {"xty", xty_}, {"count", count_}};
}

RidgeScorer RidgeScorer::from_json(const nlohmann::json& j) {
    RidgeScorer s(j.at("dim").get<int>(), j.at("lambda").get<double>());
    s.inv_ = j.at("inv").get<std::vector<double>>();
    s.xty_ = j.at("xty").get<std::vector<double>>();
    s.count_ = j.at("count").get<int64_t>();
    return s;
}

ScorerRegistry::ScorerRegistry(int dim, double lambda) : scorer_(dim, lambda) {}

void ScorerRegistry::fit_sample(const std::string& id, std::vector<double> x, double y) {
    if (samples_.count(id)) throw Error("sample already fitted: " + id);
    scorer_.fit(x, y);
    samples_[id] = {std::move(x), y};
}

void ScorerRegistry::unlearn_sample(const std::string& id) {
    auto it = samples_.find(id);
    if (it == samples_.end()) throw Error("sample never fitted: " + id);
    scorer_.unlearn(it->second.first, it->second.second);
    samples_.erase(it);
}

bool ScorerRegistry::has_sample(const std::string& id) const { return samples_.count(id) > 0; }

std::vector<std::string> ScorerRegistry::sample_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : samples_) out.push_back(id);
    return out;
}

nlohmann::json ScorerRegistry::to_json() const {
    nlohmann::json samples = nlohmann::json::object();
    for (const auto& [id, sample] : samples_) {
        samples[id] = {{"x", sample.first}, {"y", sample.second}};
    }
    return {{"scorer", scorer_.to_json()}, {"samples", samples}};
}

ScorerRegistry ScorerRegistry::from_json(const nlohmann::json& j) {
    auto scorer = RidgeScorer::from_json(j.at("scorer"));
    ScorerRegistry reg(scorer.dim(), scorer.lambda());
    reg.scorer_ = std::move(scorer);
    for (auto it = j.at("samples").begin(); it != j.at("samples").end(); ++it) {
        reg.samples_[it.key()] = {it.value().at("x").get<std::vector<double>>(),
                                  it.value().at("y").get<double>()};
    }
    return reg;
}

JobOutbox::JobOutbox(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        keys_.insert(RefreshJob::from_json(nlohmann::json::parse(line)).idempotency_key);
    }
}

bool JobOutbox::emit(const RefreshJob& job) {
    std::lock_guard lock(mutex_);
    if (job.idempotency_key.empty()) throw Error("job without idempotency key");
    if (!keys_.insert(job.idempotency_key).second) return false;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to outbox " + path_);
    out << job.to_json().dump() << "\n";
    return true;
}

std::vector<RefreshJob> JobOutbox::peek() const {
    std::lock_guard lock(mutex_);
    std::vector<RefreshJob> jobs;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) jobs.push_back(RefreshJob::from_json(nlohmann::json::parse(line)));
    }
    return jobs;
}

std::vector<RefreshJob> JobOutbox::drain() {
    auto jobs = peek();
    std::lock_guard lock(mutex_);
    std::remove((path_ + ".consumed").c_str());
    std::rename(path_.c_str(), (path_ + ".consumed").c_str());
    return jobs;
}

std::optional<RefreshJob> on_resource_change(const std::string& uri,
                                             const nlohmann::json& change, RefreshContext& ctx) {
    if (!ctx.subscribed_uris.count(uri)) {
        ctx.warnings.push_back("ignoring change on unsubscribed uri " + uri);
        return std::nullopt;
    }
    std::string kind = change.value("kind", "");
    RefreshJob job;
    auto target = ctx.uri_target_server.find(uri);
    job.target_server = target == ctx.uri_target_server.end() ? "" : target->second;

    if (uri == ctx.query_log_uri && kind == "rollover") {
        job.kind = RefreshJob::Kind::Reinforce;
        for (const auto& iw : analyze_intents(ctx.log_window)) {
            RefreshSample s;
            s.input = {{"intent", iw.intent_signature}};
            s.target = nlohmann::json();
            s.weight = iw.weight;
            job.samples.push_back(std::move(s));
        }
    } else if (kind == "insert") {
        job.kind = RefreshJob::Kind::Insert;
        if (change.contains("units")) {
            std::vector<KnowledgeUnit> units;
            for (const auto& u : change["units"]) units.push_back(knowledge_unit_from_json(u));
            job.samples = synthesize_insert_samples(units);
        } else {
            for (const auto& item : change.value("items", nlohmann::json::array())) {
                RefreshSample s;
                std::string content = item.value("content", item.dump());
                s.input = "Answer questions about this record.\n" + content;
                s.target = content;
                job.samples.push_back(std::move(s));
            }
        }
    } else if (kind == "delete") {
        job.kind = RefreshJob::Kind::Unlearn;
        for (const auto& id : change.value("ids", nlohmann::json::array())) {
            RefreshSample s;
            s.input = {{"id", id}};
            job.samples.push_back(std::move(s));
        }
    } else {
        ctx.warnings.push_back("ignoring change kind \"" + kind + "\" on " + uri);
        return std::nullopt;
    }

    job.idempotency_key = job_idempotency_key(job.kind, uri, change);
    return job;
}

}  // namespace taiji
