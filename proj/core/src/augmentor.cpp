#include "taiji/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "taiji/vector_index.hpp"

namespace taiji {

std::string Document::full_text() const {
    std::string out;
    for (const auto& [heading, body] : sections) {
        if (!out.empty()) out += "\n";
        out += body;
    }
    return out;
}

std::vector<std::string> Document::tokens() const { return tokenize(full_text()); }

nlohmann::json document_to_json(const Document& doc) {
    nlohmann::json sections = nlohmann::json::array();
    for (const auto& [heading, body] : doc.sections) {
        sections.push_back({{"heading", heading}, {"body", body}});
    }
    nlohmann::json j{{"id", doc.id},
                     {"source", doc.source},
                     {"fetched_at_us", doc.fetched_at_us},
                     {"modality", to_string(doc.modality)},
                     {"sections", sections}};
    if (doc.published_at_us) j["published_at_us"] = *doc.published_at_us;
    return j;
}

Document document_from_json(const nlohmann::json& j) {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.source = j.at("source").get<std::string>();
    doc.fetched_at_us = j.value("fetched_at_us", int64_t{0});
    if (j.contains("published_at_us")) doc.published_at_us = j["published_at_us"].get<int64_t>();
    doc.modality = modality_from_string(j.value("modality", "text")).value_or(Modality::Text);
    for (const auto& s : j.at("sections")) {
        doc.sections.emplace_back(s.value("heading", ""), s.at("body").get<std::string>());
    }
    if (doc.full_text().empty()) throw Error("document " + doc.id + " has empty body text");
    return doc;
}

std::vector<Document> load_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<Document> docs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        docs.push_back(document_from_json(nlohmann::json::parse(in)));
    }
    std::sort(docs.begin(), docs.end(),
              [](const Document& a, const Document& b) { return a.id < b.id; });
    for (size_t i = 1; i < docs.size(); ++i) {
        if (docs[i].id == docs[i - 1].id) throw Error("duplicate document id " + docs[i].id);
    }
    return docs;
}

namespace {

struct DisjointSet {
    std::vector<size_t> parent;
    explicit DisjointSet(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    size_t find(size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

DedupResult dedup(const std::vector<Document>& corpus, const DedupOptions& opts) {
    if (opts.tau_minhash < 0 || opts.tau_minhash > 1 || opts.tau_embed < 0 || opts.tau_embed > 1) {
        throw Error("dedup thresholds must lie in [0,1]");
    }
    const size_t n = corpus.size();
    DedupResult result;
    if (n == 0) return result;

    std::vector<MinHashSignature> sigs;
    std::vector<std::vector<float>> embeds;
    sigs.reserve(n);
    embeds.reserve(n);
    for (const auto& doc : corpus) {
        sigs.push_back(minhash_signature(doc.tokens(), opts.shingle_n, opts.permutations,
                                         opts.seed));
        embeds.push_back(embed_text(doc.full_text(), opts.embedder));
    }

    DisjointSet ds(n);

    // MinHash edges. LSH banding is lossless for tau >= 1 - b/h; below that
    // fall back to checking every pair.
    bool banding_lossless =
        opts.tau_minhash >= 1.0 - static_cast<double>(opts.lsh_bands) / opts.permutations;
    if (banding_lossless && n > 2) {
        std::unordered_map<uint64_t, std::vector<size_t>> buckets;
        for (size_t i = 0; i < n; ++i) {
            for (uint64_t h : lsh_band_hashes(sigs[i], opts.lsh_bands)) {
                buckets[h].push_back(i);
            }
        }
        std::set<std::pair<size_t, size_t>> candidates;
        for (const auto& [_, members] : buckets) {
            for (size_t a = 0; a < members.size(); ++a) {
                for (size_t b = a + 1; b < members.size(); ++b) {
                    candidates.emplace(std::min(members[a], members[b]),
                                       std::max(members[a], members[b]));
                }
            }
        }
        for (const auto& [i, j] : candidates) {
            if (estimate_jaccard(sigs[i], sigs[j]) >= opts.tau_minhash) ds.unite(i, j);
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                if (estimate_jaccard(sigs[i], sigs[j]) >= opts.tau_minhash) ds.unite(i, j);
            }
        }
    }

    // Embedding edges: exact all-pairs at small n, ANN candidates above.
    if (n <= opts.exact_pair_limit) {
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                if (cosine_similarity(embeds[i], embeds[j]) >= opts.tau_embed) ds.unite(i, j);
            }
        }
    } else {
        std::vector<VectorRecord> records;
        records.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            records.push_back({corpus[i].id, embeds[i], {}});
        }
        auto index = FilteredVectorIndex::build(records);
        std::map<std::string, size_t> pos;
        for (size_t i = 0; i < n; ++i) pos[corpus[i].id] = i;
        for (size_t i = 0; i < n; ++i) {
            for (const auto& hit : index.search(embeds[i], 32)) {
                size_t j = pos.at(hit.id);
                if (j == i) continue;
                if (cosine_similarity(embeds[i], embeds[j]) >= opts.tau_embed) ds.unite(i, j);
            }
        }
    }

    std::map<size_t, std::vector<size_t>> groups;
    for (size_t i = 0; i < n; ++i) groups[ds.find(i)].push_back(i);

    for (auto& [_, members] : groups) {
        DedupCluster cluster;
        size_t rep = members.front();
        for (size_t m : members) {
            cluster.member_ids.push_back(corpus[m].id);
            auto better = [&](size_t a, size_t b) {
                // earliest published_at wins; missing timestamps sort last;
                // ties by id
                const auto& pa = corpus[a].published_at_us;
                const auto& pb = corpus[b].published_at_us;
                if (pa && pb && *pa != *pb) return *pa < *pb;
                if (pa.has_value() != pb.has_value()) return pa.has_value();
                return corpus[a].id < corpus[b].id;
            };
            if (better(m, rep)) rep = m;
        }
        std::sort(cluster.member_ids.begin(), cluster.member_ids.end());
        cluster.representative = corpus[rep].id;
        result.clusters.push_back(std::move(cluster));
    }
    std::sort(result.clusters.begin(), result.clusters.end(),
              [](const DedupCluster& a, const DedupCluster& b) {
                  return a.member_ids.front() < b.member_ids.front();
              });
    for (size_t c = 0; c < result.clusters.size(); ++c) {
        for (const auto& id : result.clusters[c].member_ids) result.cluster_of[id] = c;
    }
    return result;
}

GazetteerMatcher::GazetteerMatcher(std::map<std::string, std::string> name_to_type)
    : entries_(std::move(name_to_type)) {
    for (const auto& [name, _] : entries_) {
        size_t words = 1 + static_cast<size_t>(std::count(name.begin(), name.end(), ' '));
        max_words_ = std::max(max_words_, words);
    }
}

std::vector<Entity> GazetteerMatcher::extract(const Document& doc) {
    std::string text = doc.full_text();

    // word tokens with byte spans
    struct Word {
        std::string token;
        size_t begin, end;
    };
    std::vector<Word> words;
    size_t i = 0;
    while (i < text.size()) {
        if (std::isalnum(static_cast<unsigned char>(text[i]))) {
            size_t start = i;
            while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) i++;
            words.push_back({text.substr(start, i - start), start, i});
        } else {
            i++;
        }
    }

    std::vector<Entity> out;
    size_t w = 0;
    while (w < words.size()) {
        bool matched = false;
        size_t longest = std::min(max_words_, words.size() - w);
        for (size_t len = longest; len >= 1; --len) {
            std::string phrase;
            for (size_t k = w; k < w + len; ++k) {
                if (k > w) phrase += " ";
                phrase += words[k].token;
            }
            auto it = entries_.find(phrase);
            if (it != entries_.end()) {
                out.push_back({phrase, it->second, words[w].begin, words[w + len - 1].end});
                w += len;  // longest match consumes its words
                matched = true;
                break;
            }
        }
        if (!matched) w++;
    }
    return out;
}

nlohmann::json knowledge_unit_to_json(const KnowledgeUnit& u) {
    nlohmann::json entities = nlohmann::json::array();
    for (const auto& e : u.entities) {
        entities.push_back({{"name", e.name}, {"type", e.type}, {"begin", e.begin}, {"end", e.end}});
    }
    nlohmann::json j{{"id", u.id},
                     {"content", u.content},
                     {"entities", entities},
                     {"sources", std::vector<std::string>(u.sources.begin(), u.sources.end())},
                     {"modality", to_string(u.modality)},
                     {"credibility", u.credibility},
                     {"fetched_at_us", u.fetched_at_us},
                     {"status", u.status == KnowledgeUnit::Status::Retained    ? "retained"
                                : u.status == KnowledgeUnit::Status::Rejected ? "rejected"
                                                                              : "candidate"}};
    if (u.published_at_us) j["published_at_us"] = *u.published_at_us;
    return j;
}

KnowledgeUnit knowledge_unit_from_json(const nlohmann::json& j) {
    KnowledgeUnit u;
    u.id = j.at("id").get<std::string>();
    u.content = j.at("content").get<std::string>();
    for (const auto& e : j.value("entities", nlohmann::json::array())) {
        u.entities.push_back({e.at("name").get<std::string>(), e.at("type").get<std::string>(),
                              e.value("begin", size_t{0}), e.value("end", size_t{0})});
    }
    for (const auto& s : j.at("sources")) u.sources.insert(s.get<std::string>());
    u.modality = modality_from_string(j.value("modality", "text")).value_or(Modality::Text);
    u.credibility = j.value("credibility", 0.5);
    u.fetched_at_us = j.value("fetched_at_us", int64_t{0});
    if (j.contains("published_at_us")) u.published_at_us = j["published_at_us"].get<int64_t>();
    std::string status = j.value("status", "candidate");
    u.status = status == "retained"   ? KnowledgeUnit::Status::Retained
               : status == "rejected" ? KnowledgeUnit::Status::Rejected
                                      : KnowledgeUnit::Status::Candidate;
    return u;
}

void SourceRelationMap::mark_related(const std::string& a, const std::string& b) {
    related_.emplace(std::min(a, b), std::max(a, b));
}

bool SourceRelationMap::related(const std::string& a, const std::string& b) const {
    if (a == b) return true;
    return related_.count({std::min(a, b), std::max(a, b)}) > 0;
}

SourceRelationMap SourceRelationMap::from_json(const nlohmann::json& j) {
    SourceRelationMap map;
    for (const auto& pair : j.value("related_pairs", nlohmann::json::array())) {
        map.mark_related(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
    return map;
}

KnowledgeUnit::Status corroborate(const KnowledgeUnit& unit, const SourceRelationMap& relations) {
    if (unit.sources.empty()) throw Error("corroborate needs at least one source");
    for (auto a = unit.sources.begin(); a != unit.sources.end(); ++a) {
        for (auto b = std::next(a); b != unit.sources.end(); ++b) {
            if (!relations.related(*a, *b)) return KnowledgeUnit::Status::Retained;
        }
    }
    return KnowledgeUnit::Status::Rejected;
}

void KnowledgeCatalog::add(KnowledgeUnit unit) {
    if (unit.status != KnowledgeUnit::Status::Retained) {
        throw Error("only retained units are indexed: " + unit.id);
    }
    units_.push_back(std::move(unit));
}

std::vector<KnowledgeUnit> KnowledgeCatalog::query(const KnowledgeQuery& q) const {
    std::vector<KnowledgeUnit> out;
    for (const auto& u : units_) {
        if (q.modality && u.modality != *q.modality) continue;
        if (u.credibility < q.min_credibility) continue;
        int64_t t = u.published_at_us.value_or(u.fetched_at_us);
        if (q.window_from_us && t < *q.window_from_us) continue;
        if (q.window_to_us && t >= *q.window_to_us) continue;
        out.push_back(u);
    }
    auto score = [&](const KnowledgeUnit& u) {
        int64_t t = u.published_at_us.value_or(u.fetched_at_us);
        double age_days = static_cast<double>(q.now_us - t) / (86400.0 * 1e6);
        return u.credibility * std::exp(-q.decay_lambda * std::max(age_days, 0.0));
    };
    std::stable_sort(out.begin(), out.end(), [&](const KnowledgeUnit& a, const KnowledgeUnit& b) {
        double sa = score(a), sb = score(b);
        if (sa != sb) return sa > sb;
        return a.id < b.id;
    });
    return out;
}

void KnowledgeCatalog::save_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write catalog to " + path);
    for (const auto& u : units_) out << knowledge_unit_to_json(u).dump() << "\n";
}

size_t KnowledgeCatalog::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::string line;
    size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        add(knowledge_unit_from_json(nlohmann::json::parse(line)));
        count++;
    }
    return count;
}

AugmentorConfig augmentor_config_from_json(const nlohmann::json& j) {
    AugmentorConfig config;
    if (j.contains("dedup")) {
        const auto& d = j["dedup"];
        config.dedup.shingle_n = d.value("shingle_n", config.dedup.shingle_n);
        config.dedup.permutations = d.value("permutations", config.dedup.permutations);
        config.dedup.seed = d.value("seed", config.dedup.seed);
        config.dedup.tau_minhash = d.value("tau_minhash", config.dedup.tau_minhash);
        config.dedup.tau_embed = d.value("tau_embed", config.dedup.tau_embed);
    }
    nlohmann::json gazetteer = j.value("gazetteer", nlohmann::json::object());
    for (auto it = gazetteer.begin(); it != gazetteer.end(); ++it) {
        config.gazetteer[it.key()] = it.value().get<std::string>();
    }
    config.relations = SourceRelationMap::from_json(j);
    nlohmann::json credibility = j.value("source_credibility", nlohmann::json::object());
    for (auto it = credibility.begin(); it != credibility.end(); ++it) {
        config.source_credibility[it.key()] = it.value().get<double>();
    }
    return config;
}

nlohmann::json AugmentReport::to_json() const {
    return {{"documents", documents},
            {"clusters", clusters},
            {"retained", retained},
            {"rejected", rejected}};
}

AugmentReport run_augment_pipeline(const std::vector<Document>& corpus,
                                   const AugmentorConfig& config, KnowledgeCatalog& catalog) {
    AugmentReport report;
    report.documents = corpus.size();
    if (corpus.empty()) return report;

    auto clusters = dedup(corpus, config.dedup);
    report.clusters = clusters.clusters.size();

    std::map<std::string, const Document*> by_id;
    for (const auto& d : corpus) by_id[d.id] = &d;

    GazetteerMatcher ner(config.gazetteer);
    for (const auto& cluster : clusters.clusters) {
        const Document& rep = *by_id.at(cluster.representative);

        KnowledgeUnit unit;
        unit.id = "ku-" + rep.id;
        unit.content = rep.full_text().substr(0, config.content_extract_chars);
        unit.entities = ner.extract(rep);
        unit.modality = rep.modality;
        unit.published_at_us = rep.published_at_us;
        unit.fetched_at_us = rep.fetched_at_us;
        for (const auto& member : cluster.member_ids) {
            unit.sources.insert(by_id.at(member)->source);
        }
        double cred = 0.0;
        for (const auto& s : unit.sources) {
            auto it = config.source_credibility.find(s);
            cred = std::max(cred, it == config.source_credibility.end() ? 0.5 : it->second);
        }
        unit.credibility = cred;

        unit.status = corroborate(unit, config.relations);
        if (unit.status == KnowledgeUnit::Status::Retained) {
            catalog.add(unit);
            report.retained++;
        } else {
            report.rejected++;
        }
    }
    return report;
}

}  // namespace taiji
