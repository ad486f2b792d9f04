#include <benchmark/benchmark.h>

#include <vector>

#include "vipcop/engine.hpp"
#include "vipcop/evaluator.hpp"
#include "vipcop/rng.hpp"

using namespace vipcop;

namespace {

Table flat_table(std::size_t n, std::size_t d) {
  std::vector<double> x(n * d);
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<Label>(i % 2);
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = static_cast<double>(i + j);
  }
  return Table(n, d, std::move(x), std::move(y), 2);
}

std::vector<double> random_phi(std::size_t s, std::uint64_t seed) {
  Stream rng(seed);
  std::vector<double> phi(s);
  for (double& v : phi) v = rng.normal(0.0, 0.01);
  return phi;
}

}  // namespace

// Inclusion probabilities for one kind: sort + log-sum-exp.
static void BM_InclusionProbabilities(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const auto logits = random_phi(s, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(inclusion_probabilities(logits, s / 10));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s));
}
BENCHMARK(BM_InclusionProbabilities)->Arg(1000)->Arg(10000)->Arg(100000);

static void BM_SystematicSample(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const auto incl = inclusion_probabilities(random_phi(s, 2), s / 10);
  Stream rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(systematic_sample(incl, s / 10, rng));
  }
}
BENCHMARK(BM_SystematicSample)->Arg(1000)->Arg(10000);

static void BM_SgdStep(benchmark::State& state) {
  const std::size_t s = 10000;
  const auto m = static_cast<std::size_t>(state.range(0));
  Stream rng(4);
  std::vector<SubsetObservation> batch(32);
  for (auto& o : batch) {
    for (auto i : rng.choose(s, m)) o.members.push_back(static_cast<std::uint32_t>(i));
    o.performance = rng.uniform();
  }
  auto phi = random_phi(s, 5);
  for (auto _ : state) {
    phi = sgd_step(phi, batch, 1e-4).phi;
    benchmark::DoNotOptimize(phi.data());
  }
}
BENCHMARK(BM_SgdStep)->Arg(100)->Arg(1000);

// One engine round at S=10,000, B=32 against an evaluator that costs
// almost nothing, so the time is the engine's own.
static void BM_EngineRound(benchmark::State& state) {
  const std::size_t n = 10000;
  const Table train = flat_table(n, 4);
  const Table val = flat_table(4, 4);
  AdditiveOracle oracle(random_phi(n, 6), {}, 0.5, 0.0, 7);
  EngineConfig cfg;
  cfg.rounds = 1;
  cfg.batch = 32;
  const Budget budget{static_cast<std::size_t>(state.range(0)), 4};
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_single(train, val, oracle, budget, cfg, 1.0));
  }
}
BENCHMARK(BM_EngineRound)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

static void BM_KnnScore(benchmark::State& state) {
  const Table train = flat_table(2000, 10);
  const Table val = flat_table(200, 10);
  KnnEvaluator knn(5);
  Stream rng(8);
  const ContextSelection ctx{rng.choose(2000, 200), iota_indices(10)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn.score_subset(train, ctx, val, Metric::kBalancedAccuracy));
  }
}
BENCHMARK(BM_KnnScore)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
