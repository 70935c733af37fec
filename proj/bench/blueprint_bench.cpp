#include <benchmark/benchmark.h>

#include <random>

#include "blueprint/executor.hpp"
#include "blueprint/graph.hpp"
#include "blueprint/layout_dp.hpp"
#include "blueprint/oracles.hpp"
#include "blueprint/reference.hpp"

using namespace blueprint;

namespace {

const Graph& attention() {
  static const Graph g = load_model_file(std::string(MODELS_DIR) + "/attention_block.json");
  return g;
}

std::vector<float> noise(int64_t n) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> d(-1, 1);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

// Exhaustive search over the attention model: 8192 joint configurations.
void BM_BruteForce(benchmark::State& state) {
  AnalyticCostModel cost;
  const auto mode = state.range(0) ? Parallelism::kOpenMP : Parallelism::kSerial;
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_schedule(attention(), cost, kDefaultBudget, 24, mode));
}
BENCHMARK(BM_BruteForce)->Arg(0)->Arg(1)->ArgName("openmp")->Unit(benchmark::kMillisecond);

Graph square_matmul(int64_t n) {
  TensorDecl a{"A", {n, n}, TensorKind::kInput, std::nullopt};
  TensorDecl b{"B", {n, n}, TensorKind::kConstant, noise(n * n)};
  TensorDecl c{"C", {n, n}, TensorKind::kOutput, std::nullopt};
  NodeDecl mm{"mm", OpKind::kMatMul, {"A", "B"}, {"C"}, {}};
  return Graph({a, b, c}, {mm});
}

void BM_ExecutorMatMul(benchmark::State& state) {
  const int64_t n = state.range(0);
  const LoopOrder order = LoopOrder::all()[state.range(1)];
  Graph g = square_matmul(n);
  Schedule s = identity_schedule(g);
  s.loop_order["mm"] = order;
  Executor ex(g, s, plan_memory(g, s));
  std::map<std::string, std::vector<float>> in = {{"A", noise(n * n)}};
  for (auto _ : state) benchmark::DoNotOptimize(ex.run(in));
  state.SetLabel(order.str());
}
BENCHMARK(BM_ExecutorMatMul)->ArgsProduct({{128, 256}, {0, 1, 2, 3, 4, 5}})->Unit(benchmark::kMicrosecond);

void BM_ReferenceMatMul(benchmark::State& state) {
  const int64_t n = state.range(0);
  auto a = noise(n * n), b = noise(n * n);
  for (auto _ : state) benchmark::DoNotOptimize(reference::matmul(a, b, n, n, n));
}
BENCHMARK(BM_ReferenceMatMul)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Plan(benchmark::State& state) {
  AnalyticCostModel cost;
  for (auto _ : state) benchmark::DoNotOptimize(plan_schedule(attention(), cost));
}
BENCHMARK(BM_Plan)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
