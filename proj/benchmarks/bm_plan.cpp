#include <benchmark/benchmark.h>

#include "taiji/plan.hpp"

using namespace taiji;

namespace {

QueryPlan make_chain(int filters) {
    QueryPlan plan;
    Operator scan;
    scan.kind = OpKind::Scan;
    scan.dataset_id = "furniture";
    auto cur = plan.add_node(scan);
    for (int i = 0; i < filters; ++i) {
        Operator f;
        f.kind = OpKind::Filter;
        f.predicate = Predicate::compare(
            Predicate::Cmp::Lt, Predicate::column("price"),
            Predicate::literal(Value{static_cast<double>(i)}));
        cur = plan.add_node(f, {cur});
    }
    return plan;
}

void BM_PlanSignature(benchmark::State& state) {
    auto plan = make_chain(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(plan_signature(plan));
    }
}
BENCHMARK(BM_PlanSignature)->Arg(4)->Arg(16)->Arg(64);

void BM_TopologicalOrder(benchmark::State& state) {
    auto plan = make_chain(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(topological_order(plan));
    }
}
BENCHMARK(BM_TopologicalOrder)->Arg(4)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
