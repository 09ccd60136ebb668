#include <doctest.h>

#include <algorithm>
#include <random>

#include "taiji/iterative.hpp"

using namespace taiji;

namespace {

ScoredItem item(const std::string& id, double score, const std::string& text,
                std::vector<float> embedding = {}) {
    ScoredItem it;
    it.item = {"ds", id, Modality::Text};
    it.score = score;
    it.text = text;
    it.embedding = std::move(embedding);
    return it;
}

SubQuery task(std::vector<std::string> terms, double threshold = 0.5) {
    SubQuery q;
    q.text = "find things";
    q.terms = std::move(terms);
    q.threshold = threshold;
    return q;
}

}  // namespace

TEST_CASE("coverage is satisfied-terms over total-terms") {
    LoopResult r;
    r.items = {item("a", 0.9, "red chair"), item("b", 0.8, "blue sofa")};
    auto s = score_results(r, task({"chair", "sofa", "table", "lamp"}), LoopWeights{});
    CHECK(s.coverage == doctest::Approx(0.5));
}

TEST_CASE("identical duplicate items give redundancy 1.0") {
    std::vector<float> e{1, 0, 0};
    LoopResult r;
    r.items = {item("a", 0.9, "same", e), item("b", 0.9, "same", e), item("c", 0.9, "same", e)};
    auto s = score_results(r, task({"same"}), LoopWeights{});
    CHECK(s.redundancy == doctest::Approx(1.0));
}

TEST_CASE("empty result set scores zero coverage, redundancy, informativeness") {
    LoopResult r;
    auto s = score_results(r, task({"anything"}), LoopWeights{});
    CHECK(s.coverage == doctest::Approx(0.0));
    CHECK(s.redundancy == doctest::Approx(0.0));
    CHECK(s.informativeness == doctest::Approx(0.0));
    CHECK(s.ambiguity == doctest::Approx(0.0));
}

TEST_CASE("score_results requires at least one term") {
    LoopResult r;
    CHECK_THROWS_AS(score_results(r, task({}), LoopWeights{}), Error);
}

TEST_CASE("composite is the weighted combination and weights sum to one") {
    LoopWeights w;
    CHECK(w.coverage + w.redundancy + w.ambiguity + w.informativeness == doctest::Approx(1.0));
    LoopResult r;
    r.items = {item("a", 0.6, "chair red", {1, 0}), item("b", 0.4, "chair blue", {0, 1})};
    auto s = score_results(r, task({"chair"}), w);
    double expect = w.coverage * s.coverage + w.redundancy * (1 - s.redundancy) +
                    w.ambiguity * (1 - s.ambiguity) + w.informativeness * s.informativeness;
    CHECK(s.composite == doctest::Approx(expect));
}

TEST_CASE("coverage and redundancy are invariant under item order") {
    std::mt19937 rng(4);
    LoopResult r;
    r.items = {item("a", 0.9, "chair", {1, 0, 0}), item("b", 0.5, "sofa", {0, 1, 0}),
               item("c", 0.2, "lamp", {0, 0, 1})};
    auto t = task({"chair", "lamp"});
    auto base = score_results(r, t, LoopWeights{});
    for (int i = 0; i < 10; ++i) {
        std::shuffle(r.items.begin(), r.items.end(), rng);
        auto s = score_results(r, t, LoopWeights{});
        CHECK(s.coverage == doctest::Approx(base.coverage));
        CHECK(s.redundancy == doctest::Approx(base.redundancy));
    }
}

TEST_CASE("low coverage relaxes the threshold by delta") {
    EvidenceScore s;
    s.coverage = 0.3;  // below the 0.5 floor, everything else nominal
    s.redundancy = 0.2;
    s.ambiguity = 0.2;
    auto out = refine(task({"a", "b"}, 0.5), s, LoopConfig{});
    CHECK(out.action == RefineAction::RelaxThreshold);
    CHECK(out.query.threshold == doctest::Approx(0.4));
}

TEST_CASE("fully relaxed threshold drops the lowest-weight term instead") {
    EvidenceScore s;
    s.coverage = 0.1;
    auto out = refine(task({"a", "b"}, 0.0), s, LoopConfig{});
    CHECK(out.action == RefineAction::DropTerm);
    CHECK(out.query.terms == std::vector<std::string>{"a"});
}

TEST_CASE("high redundancy appends the diversity constraint") {
    EvidenceScore s;
    s.coverage = 0.8;
    s.redundancy = 0.95;
    auto out = refine(task({"a"}), s, LoopConfig{});
    CHECK(out.action == RefineAction::Diversify);
    CHECK(out.query.diversify);
}

TEST_CASE("high ambiguity raises k") {
    EvidenceScore s;
    s.coverage = 0.8;
    s.redundancy = 0.1;
    s.ambiguity = 0.95;
    auto q = task({"a"});
    q.k = 10;
    auto out = refine(q, s, LoopConfig{});
    CHECK(out.action == RefineAction::RaiseK);
    CHECK(out.query.k == 15);
}

TEST_CASE("nominal dimensions with low composite fall through to clarification") {
    EvidenceScore s;
    s.coverage = 0.6;
    s.redundancy = 0.3;
    s.ambiguity = 0.3;
    s.informativeness = 0.5;
    auto out = refine(task({"a"}), s, LoopConfig{});
    CHECK(out.action == RefineAction::Clarify);
}

namespace {

// Executor whose composite strictly improves each pass via higher scores.
LoopExecutor monotone_executor() {
    auto calls = std::make_shared<int>(0);
    return [calls](const SubQuery& q) {
        (*calls)++;
        double base = 0.2 * *calls;
        LoopResult r;
        r.items = {item("m" + std::to_string(*calls), std::min(1.0, base), q.terms.front(),
                        {1, 0})};
        return r;
    };
}

}  // namespace

TEST_CASE("first pass at or above threshold exits after one iteration") {
    LoopExecutor exec = [](const SubQuery& q) {
        LoopResult r;
        r.items = {item("hit", 1.0, q.terms.front(), {1, 0})};
        return r;
    };
    LoopConfig config;
    config.confidence_threshold = 0.7;
    auto out = run_loop(task({"chair"}), exec, config);
    CHECK(out.iterations == 1);
    REQUIRE(out.best.items.size() == 1);
    CHECK(out.best.items[0].item.item_id == "hit");
    CHECK(out.history.back().action == "early-exit");
}

TEST_CASE("monotone fixture converges and returns the final iteration's set") {
    LoopConfig config;
    config.budget = 6;
    config.confidence_threshold = 0.75;
    auto out = run_loop(task({"chair"}, 0.5), monotone_executor(), config);
    CHECK(out.iterations <= config.budget);
    // best is the last executed pass since composite strictly rises
    CHECK(out.best_score.composite ==
          doctest::Approx(out.history.back().score.composite));
    for (size_t i = 1; i < out.history.size(); ++i) {
        CHECK(out.history[i].score.composite > out.history[i - 1].score.composite);
    }
}

TEST_CASE("adversarial constant executor stops exactly at budget with argmax result") {
    LoopExecutor constant = [](const SubQuery&) {
        LoopResult r;
        r.items = {item("same", 0.1, "unrelated", {1, 0})};
        return r;
    };
    LoopConfig config;
    config.budget = 3;
    auto out = run_loop(task({"chair"}), constant, config);
    CHECK(out.iterations == 3);
    REQUIRE(out.history.size() == 3);
    double max_composite = 0;
    for (const auto& e : out.history) max_composite = std::max(max_composite, e.score.composite);
    CHECK(out.best_score.composite == doctest::Approx(max_composite));
    CHECK(out.history.back().action == "budget-exhausted");
}

TEST_CASE("run_loop terminates within budget for arbitrary executors") {
    std::mt19937 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        LoopConfig config;
        config.budget = std::uniform_int_distribution<int>(1, 5)(rng);
        config.confidence_threshold = 0.99;
        auto seed = rng();
        LoopExecutor chaotic = [seed](const SubQuery& q) {
            std::mt19937 local(seed);
            LoopResult r;
            int n = std::uniform_int_distribution<int>(0, 4)(local);
            for (int i = 0; i < n; ++i) {
                r.items.push_back(item("x" + std::to_string(i),
                                       std::uniform_real_distribution<double>(0, 0.5)(local),
                                       i % 2 ? q.terms.front() : "other"));
            }
            return r;
        };
        auto out = run_loop(task({"term"}), chaotic, config);
        CHECK(out.iterations <= config.budget);
        CHECK(out.iterations >= 1);
    }
}

TEST_CASE("executor failure aborts with partial history attached") {
    auto calls = std::make_shared<int>(0);
    LoopExecutor flaky = [calls](const SubQuery&) -> LoopResult {
        if (++*calls == 2) throw Error("backend gone");
        LoopResult r;
        r.items = {item("a", 0.1, "unrelated")};
        return r;
    };
    LoopConfig config;
    config.budget = 4;
    try {
        run_loop(task({"chair"}), flaky, config);
        FAIL("expected LoopAbort");
    } catch (const LoopAbort& e) {
        CHECK(e.history().size() == 1);
        CHECK(std::string(e.what()).find("backend gone") != std::string::npos);
    }
}

TEST_CASE("clarification channel can amend the predicate") {
    int clarified = 0;
    ClarificationChannel channel = [&](const SubQuery&, const EvidenceScore&) {
        clarified++;
        return std::optional<std::string>("find red things");
    };
    // nominal dimensions, composite below threshold -> clarify path
    LoopExecutor exec = [](const SubQuery& q) {
        LoopResult r;
        r.items = {item("a", 0.5, q.terms.front(), {1, 0}), item("b", 0.5, "other", {0, 1})};
        return r;
    };
    LoopConfig config;
    config.budget = 2;
    config.confidence_threshold = 0.95;
    auto out = run_loop(task({"chair"}), exec, config);
    CHECK(clarified == 0);  // no channel passed above; rerun with channel

    auto out2 = run_loop(task({"chair"}), exec, config, default_term_matcher(), channel);
    CHECK(clarified == 1);
    CHECK(out2.history.front().action == "clarified");
    CHECK(out2.iterations == 2);
}

TEST_CASE("loop trace serializes queries, scores, and actions") {
    LoopConfig config;
    config.budget = 2;
    auto out = run_loop(task({"chair"}), monotone_executor(), config);
    auto j = out.trace_json();
    CHECK(j.at("iterations") == out.iterations);
    CHECK(j.at("steps").size() == out.history.size());
    CHECK(j.at("steps")[0].contains("score"));
}
