#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "taiji/augmentor.hpp"

using namespace taiji;

namespace {

Document doc(const std::string& id, const std::string& source, const std::string& text,
             std::optional<int64_t> published = std::nullopt) {
    Document d;
    d.id = id;
    d.source = source;
    d.fetched_at_us = 1'000'000;
    d.published_at_us = published;
    d.sections = {{"body", text}};
    return d;
}

// Unique token stream so shingle sets are controlled exactly.
std::vector<std::string> unique_tokens(const std::string& prefix, int n, int& counter) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(counter++));
    return out;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += " ";
        out += t;
    }
    return out;
}

// Exact shingle-set Jaccard by explicit set intersection (the oracle).
double exact_jaccard(const Document& a, const Document& b, int n) {
    auto sa = shingles(a.tokens(), n);
    auto sb = shingles(b.tokens(), n);
    std::set<std::string> A(sa.begin(), sa.end()), B(sb.begin(), sb.end());
    size_t inter = 0;
    for (const auto& s : A) inter += B.count(s);
    return static_cast<double>(inter) / static_cast<double>(A.size() + B.size() - inter);
}

// Planted pair whose 3-gram shingle sets have Jaccard exactly
// shared/(shared + 2*priv): a shared core with distinct private prefixes.
std::pair<Document, Document> planted_pair(int shared_shingles, int priv, int& counter) {
    auto core = unique_tokens("c", shared_shingles + 2, counter);
    auto pa = unique_tokens("a", priv, counter);
    auto pb = unique_tokens("b", priv, counter);
    auto cat = [&](std::vector<std::string> x, const std::vector<std::string>& y) {
        x.insert(x.end(), y.begin(), y.end());
        return x;
    };
    return {doc("pa" + std::to_string(counter), "s1", join(cat(pa, core))),
            doc("pb" + std::to_string(counter), "s2", join(cat(pb, core)))};
}

}  // namespace

TEST_CASE("identical documents yield identical signatures and estimated Jaccard 1") {
    auto a = doc("a", "s1", "the quick brown fox jumps over the lazy dog");
    auto b = doc("b", "s2", "the quick brown fox jumps over the lazy dog");
    auto sa = minhash_signature(a.tokens(), 3, 128, 7);
    auto sb = minhash_signature(b.tokens(), 3, 128, 7);
    CHECK(sa.values == sb.values);
    CHECK(estimate_jaccard(sa, sb) == doctest::Approx(1.0));
}

TEST_CASE("disjoint-vocabulary documents estimate Jaccard 0") {
    int counter = 0;
    auto a = doc("a", "s1", join(unique_tokens("x", 40, counter)));
    auto b = doc("b", "s2", join(unique_tokens("y", 40, counter)));
    auto sa = minhash_signature(a.tokens(), 3, 128, 7);
    auto sb = minhash_signature(b.tokens(), 3, 128, 7);
    CHECK(estimate_jaccard(sa, sb) == doctest::Approx(0.0));
}

TEST_CASE("documents shorter than the shingle size are rejected") {
    auto a = doc("a", "s1", "too short");
    CHECK_THROWS_AS(minhash_signature(a.tokens(), 3, 128, 7), Error);
}

TEST_CASE("planted 0.5-Jaccard pairs estimate within 0.15 in at least 95 of 100 trials") {
    int counter = 0;
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto [a, b] = planted_pair(30, 15, counter);
        REQUIRE(exact_jaccard(a, b, 3) == doctest::Approx(0.5));
        auto sa = minhash_signature(a.tokens(), 3, 128, 1000 + trial);
        auto sb = minhash_signature(b.tokens(), 3, 128, 1000 + trial);
        if (std::abs(estimate_jaccard(sa, sb) - 0.5) <= 0.15) ok++;
    }
    CHECK(ok >= 95);
}

TEST_CASE("minhash estimator error stays within the binomial envelope") {
    // mean |estimate - J| <= 2*sqrt(J(1-J)/h) over 50 seeds, for three Js
    int counter = 0;
    const int h = 128;
    struct Case { int shared, priv; double j; };
    for (auto [shared, priv, j] : {Case{10, 15, 0.25}, Case{30, 15, 0.5}, Case{30, 5, 0.75}}) {
        auto [a, b] = planted_pair(shared, priv, counter);
        REQUIRE(exact_jaccard(a, b, 3) == doctest::Approx(j));
        double sum_err = 0;
        for (int seed = 0; seed < 50; ++seed) {
            auto sa = minhash_signature(a.tokens(), 3, h, 500 + seed);
            auto sb = minhash_signature(b.tokens(), 3, h, 500 + seed);
            sum_err += std::abs(estimate_jaccard(sa, sb) - j);
        }
        double mean_err = sum_err / 50.0;
        CHECK(mean_err <= 2.0 * std::sqrt(j * (1 - j) / h));
    }
}

TEST_CASE("simhash of a document against itself is distance zero") {
    auto a = doc("a", "s1", "some plain text about chairs and tables");
    auto fa = simhash_fingerprint(a.tokens());
    CHECK(hamming_distance(fa, fa) == 0);
    CHECK_THROWS_AS(simhash_fingerprint({}), Error);
}

TEST_CASE("one low-weight token change moves simhash less than an unrelated doc") {
    std::string base;
    for (int i = 0; i < 30; ++i) base += "shared token stream number " + std::to_string(i) + " ";
    auto a = doc("a", "s1", base + "ending alpha");
    auto b = doc("b", "s2", base + "ending beta");  // one low-weight change
    int counter = 0;
    auto c = doc("c", "s3", join(unique_tokens("z", 60, counter)));

    auto fa = simhash_fingerprint(a.tokens());
    auto fb = simhash_fingerprint(b.tokens());
    auto fc = simhash_fingerprint(c.tokens());
    CHECK(hamming_distance(fa, fb) <= hamming_distance(fa, fc));
}

TEST_CASE("hamming distance is symmetric on random token sets") {
    std::mt19937 rng(8);
    int counter = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto a = doc("a", "s", join(unique_tokens("p", 10 + static_cast<int>(rng() % 20), counter)));
        auto b = doc("b", "s", join(unique_tokens("q", 10 + static_cast<int>(rng() % 20), counter)));
        auto fa = simhash_fingerprint(a.tokens());
        auto fb = simhash_fingerprint(b.tokens());
        CHECK(hamming_distance(fa, fb) == hamming_distance(fb, fa));
    }
}

TEST_CASE("identical token multisets produce identical fingerprints regardless of order") {
    auto a = doc("a", "s", "alpha beta gamma delta alpha");
    auto b = doc("b", "s", "delta alpha alpha gamma beta");
    CHECK(simhash_fingerprint(a.tokens()).bits == simhash_fingerprint(b.tokens()).bits);
}

TEST_CASE("dedup keeps the earliest duplicate of k identical documents") {
    std::string text = "completely identical body text repeated across sources many times over";
    std::vector<Document> corpus = {doc("d3", "s3", text, 3000), doc("d1", "s1", text, 1000),
                                    doc("d2", "s2", text, 2000)};
    auto result = dedup(corpus);
    REQUIRE(result.clusters.size() == 1);
    CHECK(result.clusters[0].representative == "d1");
    CHECK(result.clusters[0].member_ids.size() == 3);
}

TEST_CASE("an all-distinct corpus keeps every document as its own cluster") {
    int counter = 0;
    std::vector<Document> corpus;
    for (int i = 0; i < 12; ++i) {
        corpus.push_back(doc("d" + std::to_string(i), "s", join(unique_tokens("t", 30, counter))));
    }
    auto result = dedup(corpus);
    CHECK(result.clusters.size() == corpus.size());
}

namespace {

// Independent O(n^2) transitive-closure oracle (BFS over exact pairwise
// edges); the production path clusters through LSH candidates + union-find.
std::vector<std::set<std::string>> closure_oracle(const std::vector<Document>& corpus,
                                                  const DedupOptions& opts) {
    size_t n = corpus.size();
    std::vector<MinHashSignature> sigs;
    std::vector<std::vector<float>> embeds;
    for (const auto& d : corpus) {
        sigs.push_back(minhash_signature(d.tokens(), opts.shingle_n, opts.permutations, opts.seed));
        embeds.push_back(embed_text(d.full_text(), opts.embedder));
    }
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            bool edge = estimate_jaccard(sigs[i], sigs[j]) >= opts.tau_minhash ||
                        cosine_similarity(embeds[i], embeds[j]) >= opts.tau_embed;
            adj[i][j] = adj[j][i] = edge;
        }
    }
    std::vector<bool> seen(n, false);
    std::vector<std::set<std::string>> clusters;
    for (size_t i = 0; i < n; ++i) {
        if (seen[i]) continue;
        std::set<std::string> cluster;
        std::vector<size_t> frontier{i};
        seen[i] = true;
        while (!frontier.empty()) {
            size_t u = frontier.back();
            frontier.pop_back();
            cluster.insert(corpus[u].id);
            for (size_t v = 0; v < n; ++v) {
                if (adj[u][v] && !seen[v]) {
                    seen[v] = true;
                    frontier.push_back(v);
                }
            }
        }
        clusters.push_back(std::move(cluster));
    }
    return clusters;
}

std::set<std::set<std::string>> as_set(const std::vector<std::set<std::string>>& clusters) {
    return {clusters.begin(), clusters.end()};
}

std::vector<Document> planted_corpus(int seed, int docs) {
    std::mt19937 rng(static_cast<unsigned>(seed));
    int counter = seed * 100'000;
    std::vector<Document> corpus;
    for (int i = 0; i < docs; ++i) {
        std::string id = "d" + std::to_string(i);
        std::string src = "s" + std::to_string(i % 7);
        int64_t published = 1000 + i;
        if (i > 0 && rng() % 4 == 0) {
            // duplicate of an earlier doc, sometimes with a tiny edit
            const auto& base = corpus[rng() % corpus.size()];
            std::string text = base.full_text();
            if (rng() % 2 == 0) text += " postscript" + std::to_string(i);
            corpus.push_back(doc(id, src, text, published));
        } else {
            corpus.push_back(doc(id, src, join(unique_tokens("w", 40, counter)), published));
        }
    }
    return corpus;
}

}  // namespace

TEST_CASE("dedup equals the pairwise transitive-closure oracle on planted corpora") {
    for (int seed = 1; seed <= 8; ++seed) {
        auto corpus = planted_corpus(seed, 60);
        DedupOptions opts;
        auto got = dedup(corpus, opts);
        std::vector<std::set<std::string>> got_sets;
        for (const auto& c : got.clusters) {
            got_sets.emplace_back(c.member_ids.begin(), c.member_ids.end());
        }
        REQUIRE(as_set(got_sets) == as_set(closure_oracle(corpus, opts)));
    }
}

TEST_CASE("gazetteer matches dictionary entries with types") {
    GazetteerMatcher ner(std::map<std::string, std::string>{{"PostgreSQL", "System"}});
    auto entities = ner.extract(doc("a", "s", "PostgreSQL stores tables"));
    REQUIRE(entities.size() == 1);
    CHECK(entities[0].name == "PostgreSQL");
    CHECK(entities[0].type == "System");
    CHECK(entities[0].begin == 0);
    CHECK(entities[0].end == 10);
}

TEST_CASE("gazetteer returns empty on text without hits") {
    GazetteerMatcher ner(std::map<std::string, std::string>{{"PostgreSQL", "System"}});
    CHECK(ner.extract(doc("a", "s", "nothing to see here")).empty());
}

TEST_CASE("gazetteer prefers the longest match") {
    GazetteerMatcher ner(std::map<std::string, std::string>{{"New York", "Place"}, {"York", "Place"}});
    auto entities = ner.extract(doc("a", "s", "flights to New York tonight"));
    REQUIRE(entities.size() == 1);
    CHECK(entities[0].name == "New York");
}

TEST_CASE("corroborate requires two unrelated sources") {
    KnowledgeUnit unit;
    unit.id = "u";
    unit.content = "x";
    SourceRelationMap relations;

    unit.sources = {"A"};
    CHECK(corroborate(unit, relations) == KnowledgeUnit::Status::Rejected);

    unit.sources = {"A", "B"};
    CHECK(corroborate(unit, relations) == KnowledgeUnit::Status::Retained);

    relations.mark_related("A", "B");
    CHECK(corroborate(unit, relations) == KnowledgeUnit::Status::Rejected);
}

TEST_CASE("corroborate is monotone in added sources") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        SourceRelationMap relations;
        std::vector<std::string> all = {"A", "B", "C", "D", "E"};
        for (size_t i = 0; i < all.size(); ++i) {
            for (size_t j = i + 1; j < all.size(); ++j) {
                if (rng() % 2) relations.mark_related(all[i], all[j]);
            }
        }
        KnowledgeUnit unit;
        unit.id = "u";
        unit.sources = {"A"};
        bool was_retained = false;
        for (size_t add = 1; add < all.size(); ++add) {
            unit.sources.insert(all[add]);
            bool retained = corroborate(unit, relations) == KnowledgeUnit::Status::Retained;
            if (was_retained) CHECK(retained);  // never flips back
            was_retained = retained;
        }
    }
}

TEST_CASE("knowledge catalog orders by credibility alone when decay is off") {
    KnowledgeCatalog catalog;
    auto unit = [](const std::string& id, double cred, int64_t published) {
        KnowledgeUnit u;
        u.id = id;
        u.content = "x";
        u.sources = {"A", "B"};
        u.credibility = cred;
        u.published_at_us = published;
        u.status = KnowledgeUnit::Status::Retained;
        return u;
    };
    catalog.add(unit("old-high", 0.9, 1000));
    catalog.add(unit("new-low", 0.4, 9000));
    catalog.add(unit("new-high", 0.9, 9000));

    KnowledgeQuery q;
    q.now_us = 10'000;
    auto flat = catalog.query(q);
    REQUIRE(flat.size() == 3);
    CHECK(flat[0].credibility == doctest::Approx(0.9));
    CHECK(flat[2].id == "new-low");

    q.decay_lambda = 0.5;
    q.now_us = 9000 + 86400ll * 1'000'000 * 2;  // two days after the newest
    auto decayed = catalog.query(q);
    CHECK(decayed[0].id == "new-high");  // newer of the equal-credibility pair
}

TEST_CASE("knowledge catalog time window can exclude everything") {
    KnowledgeCatalog catalog;
    KnowledgeUnit u;
    u.id = "u";
    u.content = "x";
    u.sources = {"A", "B"};
    u.published_at_us = 5000;
    u.status = KnowledgeUnit::Status::Retained;
    catalog.add(u);

    KnowledgeQuery q;
    q.window_from_us = 6000;
    q.window_to_us = 7000;
    CHECK(catalog.query(q).empty());

    u.status = KnowledgeUnit::Status::Candidate;
    CHECK_THROWS_AS(catalog.add(u), Error);
}

TEST_CASE("pipeline retains only corroborated units and every retained unit has 2+ sources") {
    std::string same = "identical knowledge text appearing in multiple places with enough tokens";
    std::vector<Document> corpus = {
        doc("a1", "srcA", same, 100),
        doc("a2", "srcB", same, 200),          // same content, unrelated source -> retained
        doc("b1", "srcC", same + " mirrored", 300),
        doc("solo", "srcD",
            "a unique single-source document with plenty of distinct tokens to shingle", 400),
    };
    AugmentorConfig config;
    config.gazetteer = {{"knowledge", "Concept"}};
    KnowledgeCatalog catalog;
    auto report = run_augment_pipeline(corpus, config, catalog);
    CHECK(report.documents == 4);
    CHECK(report.retained + report.rejected == report.clusters);
    for (const auto& u : catalog.units()) {
        CHECK(u.status == KnowledgeUnit::Status::Retained);
        // the retention invariant: some unrelated source pair exists
        CHECK(u.sources.size() >= 2);
    }
    // the solo document cannot be corroborated
    for (const auto& u : catalog.units()) {
        CHECK(u.sources.count("srcD") == 0);
    }
}

TEST_CASE("knowledge catalog persists and reloads as JSON lines") {
    KnowledgeCatalog catalog;
    KnowledgeUnit u;
    u.id = "ku-1";
    u.content = "fact";
    u.sources = {"A", "B"};
    u.status = KnowledgeUnit::Status::Retained;
    u.entities = {{"fact", "Concept", 0, 4}};
    catalog.add(u);
    catalog.save_jsonl("test_catalog.jsonl");

    KnowledgeCatalog back;
    CHECK(back.load_jsonl("test_catalog.jsonl") == 1);
    CHECK(back.units()[0].id == "ku-1");
    CHECK(back.units()[0].entities.size() == 1);
    std::remove("test_catalog.jsonl");
}
