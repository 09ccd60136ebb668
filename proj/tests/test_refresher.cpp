#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "taiji/refresher.hpp"

using namespace taiji;

namespace {

QueryLogEntry entry(const std::string& intent, int64_t ts = 0) {
    QueryLogEntry e;
    e.timestamp_us = ts;
    e.intent_signature = intent;
    e.plan_signature = intent;
    return e;
}

// Closed-form ridge retraining oracle: Gaussian elimination on
// (X^T X + lambda I) w = X^T y, independent of the scorer's inverse updates.
std::vector<double> retrain_oracle(const std::vector<std::vector<double>>& xs,
                                   const std::vector<double>& ys, int d, double lambda) {
    std::vector<std::vector<double>> a(static_cast<size_t>(d),
                                       std::vector<double>(static_cast<size_t>(d) + 1, 0.0));
    for (int i = 0; i < d; ++i) a[static_cast<size_t>(i)][static_cast<size_t>(i)] = lambda;
    for (size_t s = 0; s < xs.size(); ++s) {
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                a[static_cast<size_t>(i)][static_cast<size_t>(j)] +=
                    xs[s][static_cast<size_t>(i)] * xs[s][static_cast<size_t>(j)];
            }
            a[static_cast<size_t>(i)][static_cast<size_t>(d)] +=
                xs[s][static_cast<size_t>(i)] * ys[s];
        }
    }
    for (int col = 0; col < d; ++col) {
        int pivot = col;
        for (int r = col + 1; r < d; ++r) {
            if (std::abs(a[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
                std::abs(a[static_cast<size_t>(pivot)][static_cast<size_t>(col)])) {
                pivot = r;
            }
        }
        std::swap(a[static_cast<size_t>(col)], a[static_cast<size_t>(pivot)]);
        for (int r = 0; r < d; ++r) {
            if (r == col) continue;
            double f = a[static_cast<size_t>(r)][static_cast<size_t>(col)] /
                       a[static_cast<size_t>(col)][static_cast<size_t>(col)];
            for (int c = col; c <= d; ++c) {
                a[static_cast<size_t>(r)][static_cast<size_t>(c)] -=
                    f * a[static_cast<size_t>(col)][static_cast<size_t>(c)];
            }
        }
    }
    std::vector<double> w(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        w[static_cast<size_t>(i)] = a[static_cast<size_t>(i)][static_cast<size_t>(d)] /
                                    a[static_cast<size_t>(i)][static_cast<size_t>(i)];
    }
    return w;
}

double linf(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

KnowledgeUnit retained_unit(const std::string& id, const std::string& content) {
    KnowledgeUnit u;
    u.id = id;
    u.content = content;
    u.sources = {"A", "B"};
    u.entities = {{"thing", "Concept", 0, 5}};
    u.status = KnowledgeUnit::Status::Retained;
    return u;
}

}  // namespace

TEST_CASE("intent weights are frequency-normalized") {
    std::vector<QueryLogEntry> window = {entry("A"), entry("A"), entry("A"), entry("B")};
    auto intents = analyze_intents(window);
    REQUIRE(intents.size() == 2);
    CHECK(intents[0].intent_signature == "A");
    CHECK(intents[0].weight == doctest::Approx(0.75));
    CHECK(intents[1].weight == doctest::Approx(0.25));
}

TEST_CASE("single intent weighs 1.0 and empty window yields nothing") {
    auto one = analyze_intents({entry("only")});
    REQUIRE(one.size() == 1);
    CHECK(one[0].weight == doctest::Approx(1.0));
    CHECK(analyze_intents({}).empty());
}

TEST_CASE("intent weights sum to 1 regardless of log order") {
    std::mt19937 rng(2);
    std::vector<QueryLogEntry> window;
    for (int i = 0; i < 40; ++i) window.push_back(entry("I" + std::to_string(i % 5)));
    auto base = analyze_intents(window);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(window.begin(), window.end(), rng);
        auto intents = analyze_intents(window);
        double sum = 0;
        for (const auto& iw : intents) sum += iw.weight;
        CHECK(sum == doctest::Approx(1.0));
        REQUIRE(intents.size() == base.size());
        for (size_t i = 0; i < intents.size(); ++i) {
            CHECK(intents[i].intent_signature == base[i].intent_signature);
            CHECK(intents[i].weight == doctest::Approx(base[i].weight));
        }
    }
}

TEST_CASE("insert samples: one per (unit, template), content embedded verbatim") {
    auto samples = synthesize_insert_samples({retained_unit("u1", "water is wet")});
    CHECK(samples.size() == 2);  // two templates
    for (const auto& s : samples) {
        CHECK(s.input.get<std::string>().find("water is wet") != std::string::npos);
    }
    CHECK(synthesize_insert_samples({}).empty());

    KnowledgeUnit rejected = retained_unit("u2", "x");
    rejected.status = KnowledgeUnit::Status::Rejected;
    CHECK_THROWS_AS(synthesize_insert_samples({rejected}), Error);
}

TEST_CASE("fit one sample then unlearn it recovers the empty-ridge zero solution") {
    RidgeScorer scorer(3, 1e-3);
    std::vector<double> x{1.0, -2.0, 0.5};
    scorer.fit(x, 3.0);
    CHECK(scorer.sample_count() == 1);
    scorer.unlearn(x, 3.0);
    for (double w : scorer.weights()) CHECK(std::abs(w) <= 1e-8);
    CHECK(scorer.sample_count() == 0);
}

TEST_CASE("unlearning the middle of three samples equals retraining on the rest") {
    RidgeScorer scorer(2, 1e-3);
    std::vector<std::vector<double>> xs = {{1, 0}, {0.5, 1}, {-1, 2}};
    std::vector<double> ys = {1.0, -0.5, 2.0};
    for (size_t i = 0; i < xs.size(); ++i) scorer.fit(xs[i], ys[i]);
    scorer.unlearn(xs[1], ys[1]);

    auto expect = retrain_oracle({xs[0], xs[2]}, {ys[0], ys[2]}, 2, 1e-3);
    CHECK(linf(scorer.weights(), expect) <= 1e-8);
}

TEST_CASE("unlearn then refit recovers the original weights within 1e-8") {
    std::mt19937 rng(44);
    std::normal_distribution<double> g;
    RidgeScorer scorer(4, 1e-3);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> x(4);
        for (auto& v : x) v = g(rng);
        xs.push_back(x);
        ys.push_back(g(rng));
        scorer.fit(x, ys.back());
    }
    auto original = scorer.weights();
    scorer.unlearn(xs[4], ys[4]);
    scorer.fit(xs[4], ys[4]);
    CHECK(linf(scorer.weights(), original) <= 1e-8);
}

TEST_CASE("unlearn matches closed-form retraining on 100 random datasets") {
    std::mt19937 rng(777);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rng() % 50);
        int d = 1 + static_cast<int>(rng() % 8);
        RidgeScorer scorer(d, 1e-3);
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        for (int i = 0; i < n; ++i) {
            std::vector<double> x(static_cast<size_t>(d));
            for (auto& v : x) v = g(rng);
            xs.push_back(x);
            ys.push_back(g(rng));
            scorer.fit(x, ys.back());
        }
        size_t victim = rng() % xs.size();
        scorer.unlearn(xs[victim], ys[victim]);

        std::vector<std::vector<double>> rest_x;
        std::vector<double> rest_y;
        for (size_t i = 0; i < xs.size(); ++i) {
            if (i != victim) {
                rest_x.push_back(xs[i]);
                rest_y.push_back(ys[i]);
            }
        }
        auto expect = retrain_oracle(rest_x, rest_y, d, 1e-3);
        REQUIRE(linf(scorer.weights(), expect) <= 1e-8);
    }
}

TEST_CASE("scorer state round-trips through JSON") {
    RidgeScorer scorer(2, 0.01);
    scorer.fit(std::vector<double>{1, 2}, 3);
    auto back = RidgeScorer::from_json(scorer.to_json());
    CHECK(linf(back.weights(), scorer.weights()) <= 1e-15);
}

TEST_CASE("registry rejects unlearning samples that were never fitted") {
    ScorerRegistry registry(2, 1e-3);
    registry.fit_sample("s1", {1.0, 2.0}, 1.5);
    CHECK(registry.has_sample("s1"));
    CHECK_THROWS_AS(registry.unlearn_sample("ghost"), Error);
    CHECK_THROWS_AS(registry.fit_sample("s1", {1.0, 2.0}, 1.5), Error);
    registry.unlearn_sample("s1");
    CHECK(!registry.has_sample("s1"));
}

TEST_CASE("query log appends and reads back windows") {
    std::string path = "test_query_log.jsonl";
    std::remove(path.c_str());
    QueryLog log(path);
    log.append(entry("A", 100));
    log.append(entry("B", 200));
    log.append(entry("C", 300));
    CHECK(log.read_all().size() == 3);
    auto window = log.read_window(150, 300);
    REQUIRE(window.size() == 1);
    CHECK(window[0].intent_signature == "B");
    std::remove(path.c_str());
}

namespace {

RefreshContext make_context() {
    RefreshContext ctx;
    ctx.subscribed_uris = {"lake://furniture", "lake://knowledge", "lake://query-log"};
    ctx.uri_target_server = {{"lake://furniture", "rel-server"},
                             {"lake://knowledge", "rel-server"}};
    return ctx;
}

}  // namespace

TEST_CASE("insert change produces an Insert job with synthesized samples") {
    auto ctx = make_context();
    nlohmann::json change{{"kind", "insert"},
                          {"ids", {"7"}},
                          {"items", {{{"id", "7"}, {"content", "id=7 category=chair"}}}}};
    auto job = on_resource_change("lake://furniture", change, ctx);
    REQUIRE(job.has_value());
    CHECK(job->kind == RefreshJob::Kind::Insert);
    CHECK(job->target_server == "rel-server");
    REQUIRE(job->samples.size() == 1);
    CHECK(job->samples[0].input.get<std::string>().find("id=7") != std::string::npos);
}

TEST_CASE("knowledge-unit inserts use the instruction templates") {
    auto ctx = make_context();
    nlohmann::json change{{"kind", "insert"},
                          {"units", {knowledge_unit_to_json(retained_unit("u9", "new fact"))}}};
    auto job = on_resource_change("lake://knowledge", change, ctx);
    REQUIRE(job.has_value());
    CHECK(job->samples.size() == 2);
}

TEST_CASE("duplicate notification delivery produces the identical idempotency key") {
    auto ctx = make_context();
    nlohmann::json change{{"kind", "insert"}, {"ids", {"7"}},
                          {"items", {{{"id", "7"}, {"content", "row"}}}}};
    auto a = on_resource_change("lake://furniture", change, ctx);
    auto b = on_resource_change("lake://furniture", change, ctx);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->idempotency_key == b->idempotency_key);

    nlohmann::json other = change;
    other["ids"] = {"8"};
    auto c = on_resource_change("lake://furniture", other, ctx);
    CHECK(c->idempotency_key != a->idempotency_key);
}

TEST_CASE("delete change produces an Unlearn job naming the sample ids") {
    auto ctx = make_context();
    nlohmann::json change{{"kind", "delete"}, {"ids", {"u-1", "u-2"}}};
    auto job = on_resource_change("lake://furniture", change, ctx);
    REQUIRE(job.has_value());
    CHECK(job->kind == RefreshJob::Kind::Unlearn);
    REQUIRE(job->samples.size() == 2);
    CHECK(job->samples[0].input.at("id") == "u-1");
}

TEST_CASE("query-log rollover produces a Reinforce job with normalized weights") {
    auto ctx = make_context();
    ctx.log_window = {entry("A"), entry("A"), entry("B"), entry("C")};
    auto job = on_resource_change("lake://query-log", {{"kind", "rollover"}}, ctx);
    REQUIRE(job.has_value());
    CHECK(job->kind == RefreshJob::Kind::Reinforce);
    double sum = 0;
    for (const auto& s : job->samples) sum += s.weight;
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("changes on unsubscribed uris are ignored with a warning") {
    auto ctx = make_context();
    auto job = on_resource_change("lake://unknown", {{"kind", "insert"}}, ctx);
    CHECK(!job.has_value());
    REQUIRE(ctx.warnings.size() == 1);
    CHECK(ctx.warnings[0].find("lake://unknown") != std::string::npos);
}

TEST_CASE("outbox deduplicates by idempotency key and drains") {
    std::string path = "test_outbox.jsonl";
    std::remove(path.c_str());
    std::remove((path + ".consumed").c_str());
    {
        JobOutbox outbox(path);
        RefreshJob job;
        job.kind = RefreshJob::Kind::Insert;
        job.idempotency_key = "job-abc";
        CHECK(outbox.emit(job));
        CHECK(!outbox.emit(job));  // redelivery suppressed
        job.idempotency_key = "job-def";
        CHECK(outbox.emit(job));
    }
    JobOutbox reopened(path);  // keys reload from disk
    RefreshJob dup;
    dup.kind = RefreshJob::Kind::Insert;
    dup.idempotency_key = "job-abc";
    CHECK(!reopened.emit(dup));

    auto drained = reopened.drain();
    CHECK(drained.size() == 2);
    CHECK(reopened.peek().empty());
    std::remove((path + ".consumed").c_str());
}
