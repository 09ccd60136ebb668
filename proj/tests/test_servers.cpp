#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"
#include "taiji/servers.hpp"

using namespace taiji;
using namespace taiji::testsupport;

namespace {

std::shared_ptr<TableStore> demo_tables() {
    auto store = std::make_shared<TableStore>(".");
    Table furniture;
    furniture.name = "furniture";
    furniture.columns = {{"id", ColumnType::Int, "", {}},
                         {"category", ColumnType::String, "", {}},
                         {"price", ColumnType::Float, "", {}}};
    for (int i = 1; i <= 600; ++i) {
        furniture.rows.push_back({static_cast<int64_t>(i),
                                  std::string(i % 3 == 0 ? "chair" : "sofa"),
                                  static_cast<double>(i)});
    }
    store->put_table(furniture);
    return store;
}

struct RelFixture {
    std::shared_ptr<TableStore> tables = demo_tables();
    std::unique_ptr<McpServer> server;
    std::shared_ptr<QueueChannel> client_channel;
    std::unique_ptr<McpClient> client;

    explicit RelFixture(ServerOptions options = {}) {
        server = make_relational_server("rel-server", tables, nullptr, options);
        auto [c, s] = QueueChannel::make_pair();
        client_channel = c;
        server->attach(s);
        client = std::make_unique<McpClient>(c);
    }
};

}  // namespace

TEST_CASE("rel.execute runs a multi-node fragment and reports cardinality") {
    RelFixture fx;
    QueryPlan fragment;
    auto s = fragment.add_node(scan_op("furniture"));
    auto f = fragment.add_node(filter_op(col_eq_str("category", "chair")), {s});
    fragment.add_node(limit_op(5), {f});

    auto response = fx.client->call_tool("rel.execute", {{"fragment", plan_to_json(fragment)}});
    CHECK(response.at("cardinality") == 5);
    auto rs = fetch_result_set(*fx.client, response);
    CHECK(rs.size() == 5);
    for (const auto& t : rs.tuples) {
        CHECK(std::get<std::string>(*t.resolve("category")) == "chair");
    }
}

TEST_CASE("results larger than a page stream back through frames/read") {
    ServerOptions options;
    options.page_size = 64;
    RelFixture fx(options);
    QueryPlan fragment;
    fragment.add_node(scan_op("furniture"));

    auto response = fx.client->call_tool("rel.execute", {{"fragment", plan_to_json(fragment)}});
    CHECK(response.at("cardinality") == 600);
    CHECK(response.contains("handle"));
    CHECK(response.at("pages").get<size_t>() == 10);
    auto rs = fetch_result_set(*fx.client, response);
    CHECK(rs.size() == 600);
}

TEST_CASE("fragments can scan shipped input frames") {
    ServerOptions options;
    options.page_size = 50;
    RelFixture fx(options);

    ResultSet input;
    input.columns = {"x.id", "x.v"};
    for (int i = 0; i < 120; ++i) {
        auto& row = input.emplace_row();
        row.cells.emplace_back("x.id", Value{static_cast<int64_t>(i)});
        row.cells.emplace_back("x.v", Value{static_cast<double>(i % 10)});
    }
    std::string handle = ship_result_set(*fx.client, input, options.page_size);

    QueryPlan fragment;
    auto s = fragment.add_node(scan_op("frames://" + handle));
    fragment.add_node(filter_op(col_lt_num("x.v", 3)), {s});
    auto response = fx.client->call_tool("rel.execute", {{"fragment", plan_to_json(fragment)}});
    auto rs = fetch_result_set(*fx.client, response);
    CHECK(rs.size() == 36);  // v in {0,1,2} over 120 rows
}

TEST_CASE("rel.insert notifies lake subscribers with change payloads") {
    RelFixture fx;
    fx.client->subscribe("lake://furniture");
    auto result = fx.client->call_tool(
        "rel.insert",
        {{"table", "furniture"}, {"rows", {{601, "stool", 12.5}}}});
    CHECK(result.at("inserted") == 1);
    REQUIRE(fx.client->endpoint().wait_for_notifications(1, 2000));
    auto notifs = fx.client->endpoint().drain_notifications();
    REQUIRE(notifs.size() == 1);
    CHECK(notifs[0].params.at("uri") == "lake://furniture");
    CHECK(notifs[0].params.at("change").at("kind") == "insert");
    CHECK(notifs[0].params.at("change").at("items")[0].at("content").get<std::string>().find(
              "stool") != std::string::npos);

    auto del = fx.client->call_tool("rel.delete", {{"table", "furniture"}, {"ids", {"601"}}});
    CHECK(del.at("deleted") == 1);
    REQUIRE(fx.client->endpoint().wait_for_notifications(2, 2000));  // cumulative count
    auto del_notifs = fx.client->endpoint().drain_notifications();
    REQUIRE(del_notifs.size() == 1);
    CHECK(del_notifs[0].params.at("change").at("kind") == "delete");
}

TEST_CASE("scorer tools fit and unlearn through the registry") {
    auto tables = demo_tables();
    auto scorers = std::make_shared<ScorerRegistry>(2, 1e-3);
    auto server = make_relational_server("rel-server", tables, scorers);
    auto [c, s] = QueueChannel::make_pair();
    server->attach(s);
    McpClient client(c);

    client.call_tool("scorer.fit", {{"id", "s1"}, {"x", {1.0, 2.0}}, {"y", 1.0}});
    auto w = client.call_tool("scorer.weights", {});
    CHECK(w.at("weights").size() == 2);
    client.call_tool("scorer.unlearn", {{"id", "s1"}});
    CHECK_THROWS_AS(client.call_tool("scorer.unlearn", {{"id", "s1"}}), RpcError);
}

namespace {

struct ImageFixture {
    std::shared_ptr<LabelOracle> oracle;
    std::unique_ptr<McpServer> server;
    std::unique_ptr<McpClient> client;

    explicit ImageFixture(ServerOptions options = {}) {
        std::map<std::string, ImageLabels> fixture;
        fixture["img-two"] = {{"chair", "chair"}};
        fixture["img-one"] = {{"chair", "sofa"}};
        fixture["img-black"] = {{"black chair"}};
        oracle = std::make_shared<LabelOracle>(fixture);
        server = make_image_server("image-server", oracle,
                                   std::make_shared<FieldOracle>(
                                       std::map<std::string, std::map<std::string, Value>>{
                                           {"img-two", {{"brand", Value{std::string("acme")}}}}}),
                                   options);
        auto [c, s] = QueueChannel::make_pair();
        server->attach(s);
        client = std::make_unique<McpClient>(c);
    }

    static nlohmann::json ref(const std::string& id) {
        return value_to_json(Value{ItemRef{"image_store", id, Modality::Image}});
    }
};

}  // namespace

TEST_CASE("image.match returns one verdict row per item in input order") {
    ImageFixture fx;
    auto response = fx.client->call_tool(
        "image.match", {{"items", {ImageFixture::ref("img-one"), ImageFixture::ref("img-two"),
                                   ImageFixture::ref("img-black")}},
                        {"predicate", "images with two chairs"}});
    auto rs = fetch_result_set(*fx.client, response);
    REQUIRE(rs.size() == 3);
    CHECK(std::get<ItemRef>(*rs.tuples[0].resolve("item")).item_id == "img-one");
    CHECK(std::get<bool>(*rs.tuples[0].resolve("verdict")) == false);
    CHECK(std::get<bool>(*rs.tuples[1].resolve("verdict")) == true);
    CHECK(std::get<double>(*rs.tuples[1].resolve("confidence")) == doctest::Approx(1.0));
    CHECK(std::get<bool>(*rs.tuples[2].resolve("verdict")) == false);
}

TEST_CASE("image.match propagates unresolvable items as tool errors") {
    ImageFixture fx;
    try {
        fx.client->call_tool("image.match", {{"items", {ImageFixture::ref("ghost")}},
                                             {"predicate", "images with a chair"}});
        FAIL("expected error");
    } catch (const RpcError& e) {
        CHECK(e.code() == rpc_error::kToolExecution);
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
}

TEST_CASE("image.extract appends fixture fields") {
    ImageFixture fx;
    auto response = fx.client->call_tool(
        "image.extract",
        {{"items", {ImageFixture::ref("img-two")}}, {"fields", {"brand"}}});
    auto rs = fetch_result_set(*fx.client, response);
    REQUIRE(rs.size() == 1);
    CHECK(std::get<std::string>(*rs.tuples[0].resolve("brand")) == "acme");
}

namespace {

struct VecFixture {
    std::shared_ptr<VectorIndexRegistry> registry = std::make_shared<VectorIndexRegistry>();
    std::unique_ptr<McpServer> server;
    std::unique_ptr<McpClient> client;

    VecFixture() {
        server = make_vector_server("vec-server", registry);
        auto [c, s] = QueueChannel::make_pair();
        server->attach(s);
        client = std::make_unique<McpClient>(c);
    }
};

}  // namespace

TEST_CASE("vec.upsert then vec.sem_match returns scored items") {
    VecFixture fx;
    nlohmann::json records = nlohmann::json::array();
    for (int i = 0; i < 40; ++i) {
        records.push_back({{"id", "doc-" + std::to_string(i)},
                           {"text", "document about topic " + std::to_string(i % 5)},
                           {"metadata", {{"topic", i % 5}}}});
    }
    fx.client->call_tool("vec.upsert",
                         {{"dataset", "docs"}, {"modality", "text"}, {"records", records}});

    auto response = fx.client->call_tool(
        "vec.sem_match", {{"dataset", "docs"}, {"query", "document about topic 2"}, {"k", 5}});
    auto rs = fetch_result_set(*fx.client, response);
    REQUIRE(rs.size() == 5);
    auto top = std::get<ItemRef>(*rs.tuples[0].resolve("item"));
    CHECK(top.dataset_id == "docs");
    // identical text embeds identically: top hit is an exact topic-2 doc
    CHECK(std::get<double>(*rs.tuples[0].resolve("score")) == doctest::Approx(1.0).epsilon(1e-6));

    // filter narrows to the matching topic
    auto cond = AttrCondition::eq("topic", Value{int64_t{3}});
    fx.client->call_tool("vec.augment", {{"dataset", "docs"}, {"condition", cond.to_json()}});
    auto filtered = fetch_result_set(
        *fx.client, fx.client->call_tool("vec.sem_match", {{"dataset", "docs"},
                                                           {"query", "anything"},
                                                           {"k", 3},
                                                           {"filter", cond.to_json()}}));
    for (const auto& t : filtered.tuples) {
        auto item = std::get<ItemRef>(*t.resolve("item"));
        CHECK(item.item_id.find("doc-") == 0);
        int n = std::stoi(item.item_id.substr(4));
        CHECK(n % 5 == 3);
    }
}

TEST_CASE("vec.sem_match rejects unindexed datasets and k < 1") {
    VecFixture fx;
    CHECK_THROWS_AS(
        fx.client->call_tool("vec.sem_match", {{"dataset", "nope"}, {"query", "x"}, {"k", 3}}),
        RpcError);

    fx.client->call_tool("vec.upsert",
                         {{"dataset", "docs"},
                          {"records", {{{"id", "a"}, {"text", "hello world today"}}}}});
    CHECK_THROWS_AS(
        fx.client->call_tool("vec.sem_match", {{"dataset", "docs"}, {"query", "x"}, {"k", 0}}),
        RpcError);
}

TEST_CASE("vec.score_items scores named items against a query") {
    VecFixture fx;
    fx.client->call_tool(
        "vec.upsert",
        {{"dataset", "docs"},
         {"records",
          {{{"id", "a"}, {"text", "red chair in a room"}}, {{"id", "b"}, {"text", "blue sky"}}}}});
    auto response = fx.client->call_tool(
        "vec.score_items",
        {{"dataset", "docs"},
         {"query", "red chair in a room"},
         {"items",
          {value_to_json(Value{ItemRef{"docs", "a", Modality::Text}}),
           value_to_json(Value{ItemRef{"docs", "b", Modality::Text}})}}});
    double sa = response.at("scores").at("a").get<double>();
    double sb = response.at("scores").at("b").get<double>();
    CHECK(sa == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sa > sb);
}

TEST_CASE("the retrieval loop over vec.sem_match emits a trace and can clarify via the host") {
    VecFixture fx;
    nlohmann::json records = nlohmann::json::array();
    // five near matches (mutually distinct) and fifteen distant distractors:
    // every dimension scores nominal while the composite stays below the
    // strict threshold, which exercises the clarification fall-through
    for (int i = 0; i < 20; ++i) {
        records.push_back({{"id", "d" + std::to_string(i)},
                           {"text", i < 5 ? "garden furniture piece " + std::to_string(i)
                                          : "kitchen appliance item " + std::to_string(i)}});
    }
    fx.client->call_tool("vec.upsert", {{"dataset", "docs"}, {"records", records}});

    int clarifications = 0;
    fx.client->endpoint().register_method(
        "host/clarify", [&](const nlohmann::json&, RequestContext&) {
            clarifications++;
            return nlohmann::json{{"amended", "garden furniture piece"}};
        });

    auto response = fx.client->call_tool(
        "vec.sem_match",
        {{"dataset", "docs"},
         {"query", "garden furniture piece"},
         {"k", 5},
         {"loop", {{"budget", 3}, {"threshold", 0.99}, {"terms", {"garden", "furniture"}}}}});
    REQUIRE(response.contains("loop_trace"));
    CHECK(response.at("loop_trace").at("iterations").get<int>() <= 3);
    CHECK(response.at("loop_trace").at("steps").size() >= 1);
    // loop ran to budget; the query never scores past the strict threshold,
    // and at least one pass fell through to the clarification channel
    CHECK(clarifications >= 1);
}

TEST_CASE("concurrent searches run against a stable snapshot during upserts") {
    VecFixture fx;
    nlohmann::json records = nlohmann::json::array();
    for (int i = 0; i < 100; ++i) {
        records.push_back({{"id", "d" + std::to_string(i)},
                           {"text", "content " + std::to_string(i)}});
    }
    fx.client->call_tool("vec.upsert", {{"dataset", "docs"}, {"records", records}});

    std::atomic<bool> failed{false};
    std::thread searcher([&] {
        for (int i = 0; i < 30 && !failed; ++i) {
            try {
                auto r = fx.client->call_tool(
                    "vec.sem_match", {{"dataset", "docs"}, {"query", "content 5"}, {"k", 3}});
                if (r.at("rows").size() != 3) failed = true;
            } catch (...) {
                failed = true;
            }
        }
    });
    for (int batch = 0; batch < 5; ++batch) {
        nlohmann::json more = nlohmann::json::array();
        for (int i = 0; i < 10; ++i) {
            more.push_back({{"id", "x" + std::to_string(batch * 10 + i)},
                            {"text", "extra " + std::to_string(i)}});
        }
        fx.client->call_tool("vec.upsert", {{"dataset", "docs"}, {"records", more}});
    }
    searcher.join();
    CHECK(!failed);
}
