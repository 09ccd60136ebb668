#include <doctest.h>

#include <filesystem>
#include <random>

#include "support/fixtures.hpp"
#include "support/reference_interpreter.hpp"
#include "taiji/rel_exec.hpp"
#include "taiji/table.hpp"

using namespace taiji;
using namespace taiji::testsupport;

namespace {

Table price_table() {
    Table t;
    t.name = "items";
    t.columns = {{"id", ColumnType::Int, "", {}},
                 {"price", ColumnType::Float, "", {}},
                 {"category", ColumnType::String, "", {}}};
    auto row = [](int64_t id, double price, std::string cat) {
        return std::vector<Value>{id, price, std::move(cat)};
    };
    t.rows = {row(1, 150, "sofa"), row(2, 80, "chair"), row(3, 200, "table"),
              row(4, 99.5, "chair"), row(5, 120, "desk")};
    return t;
}

ScanResolver store_resolver(const TableStore& store) {
    return [&store](const std::string& name) { return store.scan(name); };
}

}  // namespace

TEST_CASE("filter price < 100 keeps exactly the matching rows") {
    TableStore store(".");
    store.put_table(price_table());
    QueryPlan plan;
    auto s = plan.add_node(scan_op("items"));
    plan.add_node(filter_op(col_lt_num("price", 100)), {s});

    auto rs = rel_execute(plan, store_resolver(store));
    REQUIRE(rs.size() == 2);
    CHECK(std::get<int64_t>(*rs.tuples[0].resolve("id")) == 2);
    CHECK(std::get<int64_t>(*rs.tuples[1].resolve("id")) == 4);
}

TEST_CASE("filter on constant true is the identity") {
    TableStore store(".");
    store.put_table(price_table());
    QueryPlan plan;
    auto s = plan.add_node(scan_op("items"));
    plan.add_node(filter_op(Predicate::constant(true)), {s});
    auto rs = rel_execute(plan, store_resolver(store));
    CHECK(rs.size() == 5);
}

TEST_CASE("unknown table and unknown column raise errors") {
    TableStore store(".");
    store.put_table(price_table());
    QueryPlan plan;
    plan.add_node(scan_op("nope"));
    CHECK_THROWS_AS(rel_execute(plan, store_resolver(store)), Error);

    QueryPlan plan2;
    auto s = plan2.add_node(scan_op("items"));
    plan2.add_node(filter_op(col_lt_num("missing_col", 1)), {s});
    CHECK_THROWS_AS(rel_execute(plan2, store_resolver(store)), Error);
}

TEST_CASE("type mismatch in ordering predicate is an error") {
    TableStore store(".");
    store.put_table(price_table());
    QueryPlan plan;
    auto s = plan.add_node(scan_op("items"));
    plan.add_node(filter_op(col_lt_num("category", 10)), {s});
    CHECK_THROWS_AS(rel_execute(plan, store_resolver(store)), Error);
}

TEST_CASE("join fan-out matches the nested-loop count") {
    Table left;
    left.name = "furniture";
    left.columns = {{"id", ColumnType::Int, "", {}}, {"name", ColumnType::String, "", {}}};
    left.rows = {{int64_t{1}, std::string("a")}, {int64_t{2}, std::string("b")}};

    Table right;
    right.name = "image";
    right.columns = {{"iid", ColumnType::Int, "", {}}, {"fid", ColumnType::Int, "", {}}};
    right.rows = {{int64_t{10}, int64_t{1}}, {int64_t{11}, int64_t{1}},
                  {int64_t{12}, int64_t{2}}, {int64_t{13}, int64_t{2}},
                  {int64_t{14}, int64_t{3}}};

    TableStore store(".");
    store.put_table(left);
    store.put_table(right);

    QueryPlan plan;
    auto l = plan.add_node(scan_op("furniture"));
    auto r = plan.add_node(scan_op("image"));
    plan.add_node(join_op("furniture.id", "image.fid"), {l, r});

    auto rs = rel_execute(plan, store_resolver(store));
    CHECK(rs.size() == 4);  // fan-out 2 per furniture row

    ReferenceSources sources;
    sources.tables["furniture"] = left.to_result_set();
    sources.tables["image"] = right.to_result_set();
    auto oracle = reference_execute(plan, sources);
    CHECK(tuple_multiset(rs) == tuple_multiset(oracle));
}

TEST_CASE("limit preserves the input-order prefix; project keeps named columns") {
    TableStore store(".");
    store.put_table(price_table());
    QueryPlan plan;
    auto s = plan.add_node(scan_op("items"));
    auto p = plan.add_node(project_op({"items.id", "items.price"}), {s});
    plan.add_node(limit_op(3), {p});
    auto rs = rel_execute(plan, store_resolver(store));
    REQUIRE(rs.size() == 3);
    CHECK(rs.columns == std::vector<std::string>{"items.id", "items.price"});
    CHECK(std::get<int64_t>(*rs.tuples[2].resolve("id")) == 3);
}

TEST_CASE("rel_execute equals the nested-loop oracle on 200 seeded fragments") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> rows_dist(0, 100);
    std::uniform_int_distribution<int> val_dist(0, 20);
    std::uniform_int_distribution<int> mode(0, 3);

    for (int trial = 0; trial < 200; ++trial) {
        Table a;
        a.name = "a";
        a.columns = {{"id", ColumnType::Int, "", {}}, {"v", ColumnType::Int, "", {}},
                     {"tag", ColumnType::String, "", {}}};
        int n = rows_dist(rng);
        for (int i = 0; i < n; ++i) {
            a.rows.push_back({static_cast<int64_t>(i), static_cast<int64_t>(val_dist(rng)),
                              std::string(1, static_cast<char>('a' + val_dist(rng) % 5))});
        }
        Table b;
        b.name = "b";
        b.columns = {{"k", ColumnType::Int, "", {}}, {"w", ColumnType::Int, "", {}}};
        int m = rows_dist(rng) / 2;
        for (int i = 0; i < m; ++i) {
            b.rows.push_back({static_cast<int64_t>(val_dist(rng)),
                              static_cast<int64_t>(val_dist(rng))});
        }

        TableStore store(".");
        store.put_table(a);
        store.put_table(b);

        QueryPlan plan;
        auto sa = plan.add_node(scan_op("a"));
        std::string cur = sa;
        switch (mode(rng)) {
            case 0:
                cur = plan.add_node(filter_op(col_lt_num("a.v", val_dist(rng))), {cur});
                break;
            case 1: {
                auto sb = plan.add_node(scan_op("b"));
                cur = plan.add_node(join_op("a.v", "b.k"), {cur, sb});
                cur = plan.add_node(filter_op(col_lt_num("b.w", val_dist(rng))), {cur});
                break;
            }
            case 2:
                cur = plan.add_node(filter_op(Predicate::logical_or(
                                        {col_eq_str("a.tag", "a"), col_lt_num("a.v", 3)})),
                                    {cur});
                cur = plan.add_node(limit_op(val_dist(rng)), {cur});
                break;
            default:
                cur = plan.add_node(project_op({"a.id", "a.tag"}), {cur});
                cur = plan.add_node(limit_op(val_dist(rng) + 1), {cur});
                break;
        }

        auto got = rel_execute(plan, store_resolver(store));
        ReferenceSources sources;
        sources.tables["a"] = a.to_result_set();
        sources.tables["b"] = b.to_result_set();
        auto expect = reference_execute(plan, sources);
        REQUIRE(tuple_multiset(got) == tuple_multiset(expect));
    }
}

TEST_CASE("tables round-trip through CSV plus schema sidecar") {
    namespace fs = std::filesystem;
    fs::create_directories("tmp_tables");
    Table t;
    t.name = "mixed";
    t.columns = {{"id", ColumnType::Int, "", {}},
                 {"note", ColumnType::String, "", {}},
                 {"ok", ColumnType::Bool, "", {}},
                 {"img", ColumnType::ItemRefType, "image_store", Modality::Image}};
    t.rows = {{int64_t{1}, std::string("plain"), true,
               ItemRef{"image_store", "img-1", Modality::Image}},
              {int64_t{2}, std::string("has,comma and \"quotes\""), false,
               ItemRef{"image_store", "img-2", Modality::Image}}};

    save_table(t, "tmp_tables/mixed.csv", "tmp_tables/mixed.schema.json");
    auto back = load_table("mixed", "tmp_tables/mixed.csv", "tmp_tables/mixed.schema.json");
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[1][1] == t.rows[1][1]);
    CHECK(std::get<ItemRef>(back.rows[0][3]).item_id == "img-1");
    CHECK(std::get<ItemRef>(back.rows[0][3]).modality == Modality::Image);
    fs::remove_all("tmp_tables");
}

TEST_CASE("table store insert/delete keep type checks and ids") {
    TableStore store(".");
    store.put_table(price_table());
    auto ids = store.insert_rows("items", {{int64_t{6}, 10.0, std::string("stool")}});
    CHECK(ids == std::vector<std::string>{"6"});
    CHECK(store.row_count("items") == 6);

    CHECK_THROWS_AS(store.insert_rows("items", {{std::string("oops"), 1.0, std::string("x")}}),
                    Error);

    CHECK(store.delete_rows("items", {"6", "1"}) == 2);
    CHECK(store.row_count("items") == 4);
}
