#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vipcop/evaluator.hpp"
#include "vipcop/metrics.hpp"
#include "vipcop/rng.hpp"
#include "vipcop/table.hpp"

namespace vipcop {

enum class ItemKind { kSample, kFeature };

// The optimizable items. A dimension is active when it exceeds the budget;
// active sample-items occupy [0, n), active feature-items follow.
class ItemUniverse {
 public:
  struct Item {
    ItemKind kind;
    std::size_t local;
  };

  ItemUniverse(std::size_t n, std::size_t d, const Budget& budget);

  bool optimize_samples() const { return optimize_samples_; }
  bool optimize_features() const { return optimize_features_; }
  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  std::size_t size() const { return size_; }

  // Items drawn per subset from each kind: min(budget, count).
  std::size_t sample_draw() const { return sample_draw_; }
  std::size_t feature_draw() const { return feature_draw_; }
  // Active items per subset (the number of ones in a membership vector).
  std::size_t subset_size() const;

  std::size_t feature_offset() const { return optimize_samples_ ? n_ : 0; }
  Item item(std::size_t index) const;
  std::size_t index_of(ItemKind kind, std::size_t local) const;

 private:
  std::size_t n_;
  std::size_t d_;
  bool optimize_samples_;
  bool optimize_features_;
  std::size_t size_;
  std::size_t sample_draw_;
  std::size_t feature_draw_;
};

using ValueVector = std::vector<double>;

// One scored context: the active items it contains (sorted item indices, the
// support of the binary membership vector) and its validation performance.
struct SubsetObservation {
  std::vector<std::uint32_t> members;
  double performance = 0.0;
  std::size_t run_id = 0;
  std::size_t round = 0;
  std::size_t slot = 0;

  std::vector<std::uint8_t> membership(std::size_t universe_size) const;
};

struct EngineConfig {
  std::size_t rounds = 100;
  double eta = 2.0;
  std::size_t batch = 32;
  // Unset means 0.5 / subset_size, half the largest stable step.
  std::optional<double> learning_rate;
  std::uint64_t seed = 42;
  Metric metric = Metric::kBalancedAccuracy;
  bool intercept = false;
  bool class_coverage_fixup = true;
  std::size_t parallel_eval = 1;
  std::size_t parallel_runs = 1;
  // Halt a run whose best-so-far estimate has not improved for ceil(R/4)
  // rounds.
  bool early_stop = false;
  // Starting values; 1/S everywhere when unset.
  std::optional<ValueVector> initial_phi;

  void validate() const;
  double resolved_learning_rate(const ItemUniverse& universe) const;
};

struct RunResult {
  std::size_t run_id = 0;
  double tau = 1.0;
  ValueVector phi_final;
  std::optional<double> intercept;
  ContextSelection selected;
  double estimated_val = 0.0;
  // Per completed round: best-so-far and current estimated validation
  // performance, wall-clock seconds, and seconds spent outside the evaluator.
  std::vector<double> trajectory;
  std::vector<double> round_estimate;
  std::vector<double> round_seconds;
  std::vector<double> engine_seconds;
  std::size_t rounds_completed = 0;
  std::size_t evaluator_calls = 0;
  bool stopped_early = false;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

struct OptimizeResult {
  ContextSelection selection;
  std::size_t best_run = 0;
  std::vector<double> schedule;
  std::vector<RunResult> runs;
};

// floor(log_eta(rounds)), computed exactly by repeated multiplication.
std::size_t schedule_depth(std::size_t rounds, double eta);

// tau_k = eta^(2k - r_max) for k = r_max..0, i.e. descending temperatures;
// r_max + 1 entries.
std::vector<double> temperature_schedule(std::size_t rounds, double eta);

// Softmax of phi / tau with max subtraction.
std::vector<double> sampling_distribution(std::span<const double> phi, double tau);

// Inclusion probabilities for drawing k of the items with weights
// proportional to exp(logits): pi_i = k * w_i, with items whose share would
// exceed 1 included with certainty and the rest rescaled. Sums to k.
std::vector<double> inclusion_probabilities(std::span<const double> logits, std::size_t k);

// Randomized systematic sampling: k distinct positions drawn so that position
// i is included with probability incl[i]. Result sorted ascending.
std::vector<std::size_t> systematic_sample(std::span<const double> incl, std::size_t k,
                                           Stream& rng);

// Draws one context. Within each active kind the required count is sampled
// without replacement with inclusion probabilities proportional to the
// kind's renormalized share of `probs`; inactive kinds contribute all items.
ContextSelection draw_subset(std::span<const double> probs, const ItemUniverse& universe,
                             Stream& rng);
// Same, from unnormalized log-weights (phi / tau); never underflows.
ContextSelection draw_subset_logits(std::span<const double> logits,
                                    const ItemUniverse& universe, Stream& rng);
// Per-kind inclusion probabilities for `logits`, laid out like the items.
std::vector<double> subset_inclusion(std::span<const double> logits,
                                     const ItemUniverse& universe);
ContextSelection draw_with_inclusion(std::span<const double> inclusion,
                                     const ItemUniverse& universe, Stream& rng);

// Active item indices of a context, sorted.
std::vector<std::uint32_t> context_members(const ContextSelection& ctx,
                                           const ItemUniverse& universe);

// Mean squared residual (1/B) sum_b (c_b . phi + phi_0 - p_b)^2.
double batch_loss(std::span<const double> phi, std::span<const SubsetObservation> batch,
                  std::optional<double> intercept = std::nullopt);

struct Gradient {
  std::vector<double> phi;
  double intercept = 0.0;
};
Gradient batch_gradient(std::span<const double> phi,
                        std::span<const SubsetObservation> batch,
                        std::optional<double> intercept = std::nullopt);

struct SgdResult {
  ValueVector phi;
  std::optional<double> intercept;
};
// One mini-batch step phi <- phi - lr * grad(batch_loss). The intercept moves
// only when one is given.
SgdResult sgd_step(std::span<const double> phi, std::span<const SubsetObservation> batch,
                   double learning_rate, std::optional<double> intercept = std::nullopt);

// Per active kind, the items with the largest positive values up to the
// kind's budget; a kind with no positive value falls back to its top items
// by raw value. Inactive kinds contribute all items. Ties favour the lower
// index.
ContextSelection select_context(std::span<const double> phi, const ItemUniverse& universe);

// Sum of the selected active items' values, plus the intercept if present.
double estimated_value(std::span<const double> phi, std::optional<double> intercept,
                       const ItemUniverse& universe, const ContextSelection& ctx);

// Ensures every class of `train` appears among the selected samples when the
// budget allows: the best-valued sample of each missing class (highest first)
// replaces the lowest-valued selected sample whose class stays covered.
ContextSelection class_coverage_fixup(const ContextSelection& selection, const Table& train,
                                      std::span<const double> phi,
                                      const ItemUniverse& universe);

RunResult run_single(const Table& train, const Table& val, const Evaluator& evaluator,
                     const Budget& budget, const EngineConfig& config, double tau,
                     std::size_t run_id = 0);

// One run per scheduled temperature; returns the selection of the run with
// the largest estimated validation performance (ties: earlier run).
OptimizeResult optimize(const Table& train, const Table& val, const Evaluator& evaluator,
                        const Budget& budget, const EngineConfig& config);

}  // namespace vipcop
