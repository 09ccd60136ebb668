#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"
#include "taiji/agent.hpp"
#include "taiji/expression.hpp"
#include "taiji/routing.hpp"

using namespace taiji;
using namespace taiji::testsupport;

namespace {

const std::set<std::string> kDatasets = {"furniture", "image", "docs"};

CatalogSummary summary() {
    CatalogSummary s;
    s.dataset_ids = kDatasets;
    s.schema_text = "furniture(id int, category string, price float)\nimage(id, fid, path)\n";
    return s;
}

}  // namespace

TEST_CASE("parse_expression builds the documented 4-stage chain") {
    auto plan = parse_expression(
        R"(scan(furniture) | filter(category == "chairs") | sem_match(image, "two chairs", 0.5) | limit(10))",
        kDatasets);
    REQUIRE(plan.nodes.size() == 4);
    CHECK(plan.nodes[0].second.kind == OpKind::Scan);
    CHECK(plan.nodes[1].second.kind == OpKind::Filter);
    CHECK(plan.nodes[2].second.kind == OpKind::SemMatch);
    CHECK(plan.nodes[2].second.sem_predicate == "two chairs");
    CHECK(plan.nodes[2].second.threshold == doctest::Approx(0.5));
    CHECK(plan.nodes[3].second.kind == OpKind::Limit);
    CHECK(validate_plan(plan).ok);
}

TEST_CASE("parse_expression reports unknown dataset by name") {
    CHECK_THROWS_WITH_AS(parse_expression("scan(nosuch)", kDatasets),
                         doctest::Contains("nosuch"), ParseError);
}

TEST_CASE("parse_expression reports syntax errors with byte offset") {
    try {
        parse_expression("scan(furniture) | filter(category == )", kDatasets);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 37);  // position of ')'
    }
}

TEST_CASE("parse_expression rejects unknown operator names") {
    CHECK_THROWS_WITH_AS(parse_expression("scan(furniture) | frobnicate(1)", kDatasets),
                         doctest::Contains("frobnicate"), ParseError);
}

TEST_CASE("parse_expression handles nested scan argument of join") {
    auto plan = parse_expression(
        "scan(furniture) | join(scan(image), furniture.id == image.fid)", kDatasets);
    REQUIRE(plan.nodes.size() == 3);
    const Operator* join = plan.find(plan.sink);
    REQUIRE(join);
    CHECK(join->kind == OpKind::Join);
    CHECK(join->left_key == "furniture.id");
    CHECK(join->right_key == "image.fid");
    CHECK(plan.inputs_of(plan.sink).size() == 2);
}

TEST_CASE("parse/render round-trip preserves signatures for generated plans") {
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        QueryPlan plan;
        auto cur = plan.add_node(scan_op("furniture"));
        int stages = std::uniform_int_distribution<int>(0, 4)(rng);
        for (int i = 0; i < stages; ++i) {
            switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
                case 0:
                    cur = plan.add_node(filter_op(coin(rng) ? col_eq_str("category", "x" + std::to_string(i))
                                                            : col_lt_num("price", 10.5 * (i + 1))),
                                        {cur});
                    break;
                case 1:
                    cur = plan.add_node(limit_op(i + 1), {cur});
                    break;
                case 2:
                    cur = plan.add_node(sem_match_op(Modality::Image, "thing " + std::to_string(i), 0.25 * (i % 4)),
                                        {cur});
                    break;
                case 3: {
                    QueryPlan side;
                    auto s = plan.add_node(scan_op("image"));
                    cur = plan.add_node(join_op("furniture.id", "image.fid"), {cur, s});
                    break;
                }
            }
        }
        auto rendered = render_expression(plan);
        auto reparsed = parse_expression(rendered, kDatasets);
        CHECK(plan_signature(reparsed) == plan_signature(plan));
    }
}

TEST_CASE("RuleStub translates the reference queries per the workload table") {
    auto stub = RuleStub::with_default_rules();
    auto cat = summary();

    auto q1 = translate_nl("Find a set of two chairs", stub, cat);
    bool has_q1_match = false;
    for (const auto& [id, op] : q1.nodes) {
        if (op.kind == OpKind::SemMatch && op.sem_predicate == "images with two chairs" &&
            op.modality == Modality::Image) {
            has_q1_match = true;
        }
    }
    CHECK(has_q1_match);

    auto q2 = translate_nl("Find a black leather chair", stub, cat);
    bool has_q2_match = false;
    for (const auto& [id, op] : q2.nodes) {
        if (op.kind == OpKind::SemMatch && op.sem_predicate == "images with a black chair") {
            has_q2_match = true;
        }
    }
    CHECK(has_q2_match);

    auto q3 = translate_nl("Find a set of wood table and chair", stub, cat);
    bool has_q3_match = false;
    for (const auto& [id, op] : q3.nodes) {
        if (op.kind == OpKind::SemMatch && op.sem_predicate == "images with table and chair") {
            has_q3_match = true;
        }
    }
    CHECK(has_q3_match);
}

TEST_CASE("RuleStub is a pure function of its input") {
    auto stub = RuleStub::with_default_rules();
    auto cat = summary();
    auto a = translate_nl("Find a set of two chairs", stub, cat);
    auto b = translate_nl("Find a set of two chairs", stub, cat);
    CHECK(plan_signature(a) == plan_signature(b));
}

TEST_CASE("translate_nl fails on empty query") {
    auto stub = RuleStub::with_default_rules();
    CHECK_THROWS_AS(translate_nl("", stub, summary()), Error);
}

TEST_CASE("translate_nl repairs a once-broken agent output") {
    struct FlakyAgent : AgentClient {
        std::string translate(const std::string&, const CatalogSummary&,
                              const std::string& feedback) override {
            calls++;
            if (feedback.empty()) return "scan(furniture) | filter(category == ";  // broken
            return "scan(furniture)";
        }
        int calls = 0;
    } agent;
    auto plan = translate_nl("anything", agent, summary());
    CHECK(agent.calls == 2);
    CHECK(plan_signature(plan) == "scan(furniture)");
}

TEST_CASE("translate_nl gives up after the bounded repair round") {
    struct BrokenAgent : AgentClient {
        std::string translate(const std::string&, const CatalogSummary&,
                              const std::string&) override {
            calls++;
            return "nonsense(";
        }
        int calls = 0;
    } agent;
    CHECK_THROWS_WITH_AS(translate_nl("anything", agent, summary()),
                         doctest::Contains("untranslatable"), Error);
    CHECK(agent.calls == 2);
}

namespace {

RoutingTable demo_table() {
    RoutingTable t;
    for (auto k : {OpKind::Scan, OpKind::Filter, OpKind::Project, OpKind::Limit, OpKind::Join}) {
        t.entries[{k, Modality::Relational}] = "rel-server";
    }
    t.entries[{OpKind::SemMatch, Modality::Image}] = "unstructured";
    t.entries[{OpKind::SemJoin, Modality::Image}] = "unstructured";
    t.entries[{OpKind::SemExtract, Modality::Image}] = "unstructured";
    t.entries[{OpKind::SemMatch, Modality::Text}] = "unstructured";
    t.entries[{OpKind::SemMatch, Modality::Vector}] = "vec-server";
    t.children["unstructured"] = {"image-server", "text-server"};
    t.delegation[{"unstructured", Modality::Image}] = "image-server";
    t.delegation[{"unstructured", Modality::Text}] = "text-server";
    return t;
}

}  // namespace

TEST_CASE("route assigns relational filter to rel-server by table lookup") {
    QueryPlan plan;
    auto s = plan.add_node(scan_op("furniture"));
    auto f = plan.add_node(filter_op(col_eq_str("category", "chairs")), {s});
    (void)f;
    auto assignment = route(plan, demo_table(), [](const std::string&) { return Modality::Relational; });
    CHECK(assignment.at(plan.nodes[1].first) == "rel-server");
}

TEST_CASE("route resolves image sem_match through the intermediate server to a leaf") {
    QueryPlan plan;
    auto s = plan.add_node(scan_op("furniture"));
    plan.add_node(sem_match_op(Modality::Image, "two chairs", 0.5), {s});
    auto table = demo_table();
    auto assignment = route(plan, table, [](const std::string&) { return Modality::Relational; });
    CHECK(assignment.at(plan.sink) == "image-server");
    for (const auto& [node, server] : assignment) CHECK(table.is_leaf(server));
}

TEST_CASE("route rejects an unrouted modality") {
    QueryPlan plan;
    auto s = plan.add_node(scan_op("furniture"));
    plan.add_node(sem_match_op(Modality::SemiStructured, "anything", 0.5), {s});
    CHECK_THROWS_WITH_AS(
        route(plan, demo_table(), [](const std::string&) { return Modality::Relational; }),
        doctest::Contains("unroutable"), Error);
}
