#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "support.hpp"
#include "vipcop/engine.hpp"
#include "vipcop/error.hpp"

using namespace vipcop;

namespace {

// Solves A x = b by Gauss-Jordan elimination with partial pivoting.
std::vector<double> solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i * n + i];
  return b;
}

std::vector<SubsetObservation> random_observations(std::size_t count, std::size_t s,
                                                   std::size_t m, std::uint64_t seed) {
  Stream rng(seed);
  std::vector<SubsetObservation> obs(count);
  for (auto& o : obs) {
    for (auto i : rng.choose(s, m)) o.members.push_back(static_cast<std::uint32_t>(i));
    o.performance = rng.uniform();
  }
  return obs;
}

}  // namespace

TEST(Schedule, HundredRoundsEtaTwo) {
  EXPECT_EQ(schedule_depth(100, 2.0), 6u);
  const auto taus = temperature_schedule(100, 2.0);
  const std::vector<double> expected = {64.0, 16.0, 4.0, 1.0, 0.25, 0.0625, 0.015625};
  EXPECT_EQ(taus, expected);
}

TEST(Schedule, DepthBracketsRoundsProperty) {
  for (double eta : {1.5, 2.0, 3.0, 10.0}) {
    for (std::size_t r = 1; r <= 3000; r += 7) {
      const std::size_t depth = schedule_depth(r, eta);
      EXPECT_LE(std::pow(eta, static_cast<double>(depth)), static_cast<double>(r) * (1 + 1e-12));
      EXPECT_GT(std::pow(eta, static_cast<double>(depth + 1)), static_cast<double>(r));
      const auto taus = temperature_schedule(r, eta);
      ASSERT_EQ(taus.size(), depth + 1);
      for (std::size_t i = 1; i < taus.size(); ++i) EXPECT_LT(taus[i], taus[i - 1]);
    }
  }
  EXPECT_EQ(schedule_depth(1, 2.0), 0u);
  EXPECT_EQ(temperature_schedule(1, 2.0), std::vector<double>{1.0});
  EXPECT_EQ(schedule_depth(9, 3.0), 2u);
  EXPECT_THROW(schedule_depth(10, 1.0), ConfigError);
  EXPECT_THROW(schedule_depth(0, 2.0), ConfigError);
}

TEST(Softmax, TwoItems) {
  const std::vector<double> phi = {1.0, 0.0};
  const auto p = sampling_distribution(phi, 1.0);
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p[1], 0.2689414213699951, 1e-15);
}

TEST(Softmax, ShiftInvarianceAndLimits) {
  Stream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> phi(12);
    for (double& v : phi) v = rng.normal(0.0, 3.0);
    auto shifted = phi;
    for (double& v : shifted) v += 1000.0;
    const auto a = sampling_distribution(phi, 0.5);
    const auto b = sampling_distribution(shifted, 0.5);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    const auto flat = sampling_distribution(phi, 1e9);
    for (double v : flat) EXPECT_NEAR(v, 1.0 / 12.0, 1e-6);
  }
  const auto sharp = sampling_distribution(std::vector<double>{0.0, 1.0, 0.5}, 1e-3);
  EXPECT_NEAR(sharp[1], 1.0, 1e-12);
  EXPECT_THROW(sampling_distribution(std::vector<double>{1.0}, 0.0), ConfigError);
}

TEST(Inclusion, SumsToDrawAndStaysInUnitInterval) {
  Stream rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    const std::size_t k = rng.index(n + 1);
    std::vector<double> logits(n);
    const double spread = trial % 3 == 0 ? 50.0 : 1.0;
    for (double& v : logits) v = rng.normal(0.0, spread);
    const auto incl = inclusion_probabilities(logits, k);
    EXPECT_NEAR(std::accumulate(incl.begin(), incl.end(), 0.0), static_cast<double>(k), 1e-9);
    for (double v : incl) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Inclusion, CapsDominantItem) {
  const std::vector<double> logits = {10.0, 0.0, 0.0, 0.0};
  const auto incl = inclusion_probabilities(logits, 2);
  EXPECT_EQ(incl[0], 1.0);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(incl[i], 1.0 / 3.0, 1e-12);
}

TEST(Inclusion, ProportionalWhenUncapped) {
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  std::vector<double> logits;
  for (double v : w) logits.push_back(std::log(v));
  const auto incl = inclusion_probabilities(logits, 2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(incl[i], 2.0 * w[i], 1e-12);
}

TEST(Systematic, DrawOneFrequencies) {
  const std::vector<double> incl = {0.7, 0.2, 0.1};
  std::vector<double> freq(3, 0.0);
  Stream rng(5);
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    const auto s = systematic_sample(incl, 1, rng);
    ASSERT_EQ(s.size(), 1u);
    freq[s[0]] += 1.0 / draws;
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(freq[i], incl[i], 0.01);
}

TEST(Systematic, DistinctSortedAndMatchesInclusion) {
  Stream gen(21);
  std::vector<double> logits(15);
  for (double& v : logits) v = gen.normal(0.0, 1.5);
  const auto incl = inclusion_probabilities(logits, 4);
  std::vector<double> freq(15, 0.0);
  Stream rng(22);
  const int draws = 50000;
  for (int t = 0; t < draws; ++t) {
    const auto s = systematic_sample(incl, 4, rng);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 4u);
    for (auto i : s) freq[i] += 1.0 / draws;
  }
  for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(freq[i], incl[i], 0.015);
}

TEST(DrawSubset, CardinalityPerKind) {
  const ItemUniverse u(50, 20, Budget{10, 5});
  ASSERT_EQ(u.size(), 70u);
  EXPECT_EQ(u.subset_size(), 15u);
  Stream gen(1);
  std::vector<double> logits(70);
  for (double& v : logits) v = gen.normal();
  Stream rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto ctx = draw_subset_logits(logits, u, rng);
    EXPECT_EQ(ctx.samples.size(), 10u);
    EXPECT_EQ(ctx.features.size(), 5u);
    const auto members = context_members(ctx, u);
    EXPECT_EQ(members.size(), 15u);
    EXPECT_GE(members.back(), 0u);
    EXPECT_LT(members.back(), 70u);
  }
}

TEST(DrawSubset, InactiveKindContributesEverything) {
  const ItemUniverse u(50, 4, Budget{10, 8});
  EXPECT_FALSE(u.optimize_features());
  EXPECT_EQ(u.size(), 50u);
  std::vector<double> probs(50, 1.0 / 50);
  Stream rng(4);
  const auto ctx = draw_subset(probs, u, rng);
  EXPECT_EQ(ctx.samples.size(), 10u);
  EXPECT_EQ(ctx.features, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(ItemUniverse(5, 3, Budget{10, 10}), ConfigError);
}

TEST(DrawSubset, PerKindRenormalizedMarginals) {
  // Samples and features are drawn from their own renormalized shares.
  const ItemUniverse u(6, 6, Budget{2, 2});
  std::vector<double> probs = {0.02, 0.04, 0.06, 0.08, 0.10, 0.10,
                               0.10, 0.10, 0.10, 0.10, 0.10, 0.10};
  std::vector<double> freq(12, 0.0);
  Stream rng(8);
  const int draws = 60000;
  for (int t = 0; t < draws; ++t) {
    for (auto i : context_members(draw_subset(probs, u, rng), u)) freq[i] += 1.0 / draws;
  }
  const double sample_mass = 0.40;
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(freq[i], 2.0 * probs[i] / sample_mass, 0.01);
  for (std::size_t i = 6; i < 12; ++i) EXPECT_NEAR(freq[i], 2.0 / 6.0, 0.01);
}

TEST(Sgd, HandComputedStep) {
  const std::vector<double> phi = {1.0, 0.0};
  std::vector<SubsetObservation> batch(1);
  batch[0].members = {0};
  batch[0].performance = 0.5;
  EXPECT_DOUBLE_EQ(batch_loss(phi, batch), 0.25);
  const auto g = batch_gradient(phi, batch);
  EXPECT_DOUBLE_EQ(g.phi[0], 1.0);
  EXPECT_DOUBLE_EQ(g.phi[1], 0.0);
  const auto step = sgd_step(phi, batch, 0.1);
  EXPECT_DOUBLE_EQ(step.phi[0], 0.9);
  EXPECT_DOUBLE_EQ(step.phi[1], 0.0);
  EXPECT_FALSE(step.intercept.has_value());
  const auto with_bias = sgd_step(phi, batch, 0.1, 0.25);
  EXPECT_DOUBLE_EQ(with_bias.phi[0], 1.0 - 0.1 * 1.5);
  EXPECT_DOUBLE_EQ(*with_bias.intercept, 0.25 - 0.1 * 1.5);
}

TEST(Sgd, GradientMatchesCentralDifferences) {
  Stream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t s = 5 + rng.index(20);
    const std::size_t m = 1 + rng.index(s);
    const auto batch = random_observations(1 + rng.index(10), s, m, 100 + trial);
    std::vector<double> phi(s);
    for (double& v : phi) v = rng.normal(0.0, 0.3);
    const double bias = rng.normal();
    const auto g = batch_gradient(phi, batch, bias);
    const double h = 1e-5;
    for (std::size_t i = 0; i < s; ++i) {
      auto up = phi;
      auto down = phi;
      up[i] += h;
      down[i] -= h;
      const double fd = (batch_loss(up, batch, bias) - batch_loss(down, batch, bias)) / (2 * h);
      EXPECT_NEAR(g.phi[i], fd, 1e-6);
    }
    const double fd0 =
        (batch_loss(phi, batch, bias + h) - batch_loss(phi, batch, bias - h)) / (2 * h);
    EXPECT_NEAR(g.intercept, fd0, 1e-6);
  }
}

TEST(Sgd, FullBatchConvergesToNormalEquations) {
  const std::size_t s = 20;
  const auto obs = random_observations(200, s, 8, 77);
  std::vector<double> ata(s * s, 0.0);
  std::vector<double> atb(s, 0.0);
  for (const auto& o : obs) {
    for (auto i : o.members) {
      atb[i] += o.performance;
      for (auto j : o.members) ata[i * s + j] += 1.0;
    }
  }
  for (std::size_t i = 0; i < s; ++i) ata[i * s + i] += 1e-9;
  const auto exact = solve(ata, atb);
  std::vector<double> phi(s, 1.0 / s);
  for (int it = 0; it < 20000; ++it) phi = sgd_step(phi, obs, 0.5 / 8).phi;
  for (std::size_t i = 0; i < s; ++i) EXPECT_NEAR(phi[i], exact[i], 1e-4);
}

TEST(Select, PositiveTopKAndFallback) {
  const ItemUniverse u(6, 1, Budget{3, 1});
  EXPECT_EQ(select_context(std::vector<double>{0.1, 0.5, -1, 0.5, 0.2, 0.3}, u).samples,
            (std::vector<std::size_t>{1, 3, 5}));
  // Only two positive values: the selection stays below budget.
  EXPECT_EQ(select_context(std::vector<double>{-0.1, 0.5, -1, 0, 0.2, -0.3}, u).samples,
            (std::vector<std::size_t>{1, 4}));
  // Nothing positive: the top items by raw value, ties to the lower index.
  EXPECT_EQ(select_context(std::vector<double>{-0.1, -0.5, -1, -0.1, -0.2, -0.1}, u).samples,
            (std::vector<std::size_t>{0, 3, 5}));
}

TEST(Select, EstimatedValueIncludesIntercept) {
  const ItemUniverse u(4, 4, Budget{2, 1});
  const std::vector<double> phi = {0.1, 0.2, 0.3, -0.4, 0.0, 0.05, -0.1, 0.02};
  const auto ctx = select_context(phi, u);
  EXPECT_EQ(ctx.samples, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(ctx.features, (std::vector<std::size_t>{1}));
  EXPECT_NEAR(estimated_value(phi, std::nullopt, u, ctx), 0.55, 1e-12);
  EXPECT_NEAR(estimated_value(phi, 0.1, u, ctx), 0.65, 1e-12);
}

TEST(Fixup, ReplacesLowestValuedCoveredSample) {
  const Table train = vipcop::testing::index_table(6, 1, 3);  // labels 0 1 2 0 1 2
  const ItemUniverse u(6, 1, Budget{3, 1});
  const std::vector<double> phi = {0.9, 0.8, 0.05, 0.7, 0.6, 0.01};
  const auto sel = select_context(phi, u);
  EXPECT_EQ(sel.samples, (std::vector<std::size_t>{0, 1, 3}));
  const auto fixed = class_coverage_fixup(sel, train, phi, u);
  EXPECT_EQ(fixed.samples, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Fixup, LeavesCoveredSelectionAloneAndRespectsBudget) {
  const Table train = vipcop::testing::index_table(6, 1, 3);
  const ItemUniverse u(6, 1, Budget{3, 1});
  const std::vector<double> phi = {0.9, 0.8, 0.7, 0.1, 0.1, 0.1};
  const auto sel = select_context(phi, u);
  EXPECT_EQ(class_coverage_fixup(sel, train, phi, u).samples, sel.samples);
  // Budget 2 with 3 classes: only one class can be swapped in before every
  // selected class is a singleton.
  const ItemUniverse small(6, 1, Budget{2, 1});
  const std::vector<double> phi2 = {0.9, 0.1, 0.2, 0.8, 0.1, 0.1};
  const auto fixed = class_coverage_fixup(select_context(phi2, small), train, phi2, small);
  EXPECT_EQ(fixed.samples, (std::vector<std::size_t>{0, 2}));
}

TEST(Fixup, PropertyEveryClassCoveredWhenBudgetAllows) {
  Stream rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t classes = 2 + static_cast<std::uint32_t>(rng.index(4));
    const Table train = vipcop::testing::index_table(40, 1, classes);
    const std::size_t budget = classes + rng.index(6);
    const ItemUniverse u(40, 1, Budget{budget, 1});
    std::vector<double> phi(40);
    for (double& v : phi) v = rng.normal();
    const auto sel = select_context(phi, u);
    const auto fixed = class_coverage_fixup(sel, train, phi, u);
    EXPECT_EQ(fixed.samples.size(), sel.samples.size());
    std::set<Label> seen;
    for (auto i : fixed.samples) seen.insert(train.label(i));
    if (sel.samples.size() >= classes) EXPECT_EQ(seen.size(), classes);
  }
}

namespace {

struct OracleCase {
  explicit OracleCase(std::size_t s, double noise = 0.0)
      : weights(make_weights(s)),
        train(vipcop::testing::index_table(s, 2)),
        val(vipcop::testing::index_table(4, 2)),
        oracle(weights, {}, 0.5, noise, 9) {}

  static std::vector<double> make_weights(std::size_t s) {
    std::vector<double> w(s, -0.05);
    for (std::size_t i = 0; i < 5; ++i) w[i * 3 % s] = 0.10;
    return w;
  }

  std::vector<double> weights;
  Table train;
  Table val;
  AdditiveOracle oracle;
};

}  // namespace

TEST(RunSingle, CallsRoundsTimesBatch) {
  OracleCase c(30);
  EngineConfig cfg;
  cfg.rounds = 40;
  cfg.batch = 8;
  const auto r = run_single(c.train, c.val, c.oracle, Budget{10, 5}, cfg, 1.0);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.evaluator_calls, 320u);
  EXPECT_EQ(c.oracle.calls(), 320u);
  EXPECT_EQ(r.trajectory.size(), 40u);
  EXPECT_EQ(r.round_seconds.size(), 40u);
  EXPECT_TRUE(std::is_sorted(r.trajectory.begin(), r.trajectory.end()));
  EXPECT_LE(r.selected.samples.size(), 10u);
}

TEST(RunSingle, DeterministicAcrossParallelism) {
  OracleCase a(30, 0.02);
  OracleCase b(30, 0.02);
  EngineConfig cfg;
  cfg.rounds = 30;
  cfg.batch = 8;
  const auto r1 = run_single(a.train, a.val, a.oracle, Budget{10, 5}, cfg, 0.5, 2);
  cfg.parallel_eval = 4;
  const auto r2 = run_single(b.train, b.val, b.oracle, Budget{10, 5}, cfg, 0.5, 2);
  EXPECT_EQ(r1.phi_final, r2.phi_final);
  EXPECT_EQ(r1.selected.samples, r2.selected.samples);
  EXPECT_EQ(r1.trajectory, r2.trajectory);
}

TEST(RunSingle, EarlyStopHaltsStalledRun) {
  OracleCase c(30);
  EngineConfig cfg;
  cfg.rounds = 400;
  cfg.batch = 16;
  cfg.early_stop = true;
  const auto r = run_single(c.train, c.val, c.oracle, Budget{10, 5}, cfg, 1.0);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.rounds_completed, 400u);
  EXPECT_EQ(r.trajectory.size(), r.rounds_completed);
}

TEST(RunSingle, EvaluatorFailureIsRecorded) {
  const Table train = vipcop::testing::index_table(30, 2);
  const Table val = vipcop::testing::index_table(4, 2);
  KnnEvaluator knn(3, Budget{5, 5});
  EngineConfig cfg;
  cfg.rounds = 5;
  cfg.batch = 4;
  const auto r = run_single(train, val, knn, Budget{10, 2}, cfg, 1.0);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.rounds_completed, 0u);
  EXPECT_EQ(r.selected.samples.size(), 10u);
  EXPECT_THROW(optimize(train, val, knn, Budget{10, 2}, cfg), EvaluatorError);
}

TEST(Optimize, PicksRunWithLargestEstimate) {
  OracleCase c(30);
  EngineConfig cfg;
  cfg.rounds = 60;
  cfg.batch = 8;
  const auto res = optimize(c.train, c.val, c.oracle, Budget{10, 5}, cfg);
  ASSERT_EQ(res.runs.size(), 6u);
  EXPECT_EQ(res.schedule, temperature_schedule(60, 2.0));
  for (const auto& r : res.runs) EXPECT_LE(r.estimated_val, res.runs[res.best_run].estimated_val);
  for (std::size_t k = 0; k < res.best_run; ++k) {
    EXPECT_LT(res.runs[k].estimated_val, res.runs[res.best_run].estimated_val);
  }
  EXPECT_EQ(res.selection.samples, res.runs[res.best_run].selected.samples);
}

TEST(RunSingle, ConvergesToLeastSquaresValuesOnOracle) {
  // Every subset holds 10 items, so the base 0.5 spreads as +0.05 per item.
  OracleCase c(30);
  EngineConfig cfg;
  cfg.rounds = 300;
  cfg.batch = 16;
  const auto r = run_single(c.train, c.val, c.oracle, Budget{10, 5}, cfg, 1.0);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(r.phi_final[i], c.weights[i] + 0.05, 1e-3);
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 30; ++i) {
    if (c.weights[i] > 0) truth.push_back(i);
  }
  for (auto i : truth) {
    EXPECT_TRUE(std::binary_search(r.selected.samples.begin(), r.selected.samples.end(), i));
  }
  EXPECT_NEAR(r.estimated_val, 0.75, 1e-2);
}

TEST(Optimize, SeedChangesDrawsButStaysReproducible) {
  OracleCase c(30, 0.05);
  EngineConfig cfg;
  cfg.rounds = 20;
  cfg.batch = 4;
  const auto a = optimize(c.train, c.val, c.oracle, Budget{10, 5}, cfg);
  const auto b = optimize(c.train, c.val, c.oracle, Budget{10, 5}, cfg);
  cfg.seed = 43;
  const auto other = optimize(c.train, c.val, c.oracle, Budget{10, 5}, cfg);
  EXPECT_EQ(a.runs[0].phi_final, b.runs[0].phi_final);
  EXPECT_NE(a.runs[0].phi_final, other.runs[0].phi_final);
}

TEST(EngineConfig, Validation) {
  EngineConfig cfg;
  cfg.eta = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  const ItemUniverse u(100, 3, Budget{20, 5});
  EXPECT_DOUBLE_EQ(EngineConfig{}.resolved_learning_rate(u), 0.5 / 20);
}
