#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vipcop/metrics.hpp"
#include "vipcop/table.hpp"

namespace vipcop {

// A context: which training rows and which columns the model conditions on.
// Both index lists are unique and in range; each holds at least one entry.
struct ContextSelection {
  std::vector<std::size_t> samples;
  std::vector<std::size_t> features;

  void validate(const Table& train) const;
  static ContextSelection full(const Table& train);
  bool operator==(const ContextSelection&) const = default;
};

// Context capacity (n_C, d_C) of the black-box model.
struct Budget {
  std::size_t max_samples = 1000;
  std::size_t max_features = 100;

  void validate() const;
};

// The black-box scorer. Implementations provide predict(); the public entry
// points validate contexts and outputs at the boundary.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  Evaluator() = default;
  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  virtual std::string name() const = 0;

  // One probability row per query row. `query` carries the full feature
  // universe of `train`; the context's feature subset is applied here.
  Prediction score_context(const Table& train, const ContextSelection& ctx,
                           const Table& query) const;

  // Validation performance p in [0, 1] of the context. `stream_key` seeds any
  // randomness the evaluator injects so results do not depend on call order.
  double score_subset(const Table& train, const ContextSelection& ctx, const Table& val,
                      Metric metric, std::uint64_t stream_key = 0) const;

  // Number of score_context/score_subset calls made so far.
  std::size_t calls() const { return calls_.load(); }

 protected:
  virtual Prediction predict(const Table& train, const ContextSelection& ctx,
                             const Table& query) const = 0;
  // Defaults to the metric of predict(); the additive oracle overrides it.
  virtual double score(const Table& train, const ContextSelection& ctx, const Table& val,
                       Metric metric, std::uint64_t stream_key) const;

 private:
  mutable std::atomic<std::size_t> calls_{0};
};

// Distance-weighted k-nearest-neighbour vote (weight 1 / (dist + 1e-9),
// Euclidean on the context's features). Equal distances are broken by the
// training row index, so results do not depend on context order. An optional
// capacity turns oversized contexts into CapacityExceeded.
class KnnEvaluator final : public Evaluator {
 public:
  explicit KnnEvaluator(std::size_t k = 5, std::optional<Budget> capacity = std::nullopt);
  std::string name() const override;
  std::size_t k() const { return k_; }

 protected:
  Prediction predict(const Table& train, const ContextSelection& ctx,
                     const Table& query) const override;

 private:
  std::size_t k_;
  std::optional<Budget> capacity_;
};

// Synthetic scorer whose performance is additive in the context items:
// clip(base + sum of weights of selected rows and columns + eps, 0, 1) with
// eps ~ N(0, noise_sd^2) drawn from the stream key. Used to check that the
// engine recovers known item values.
class AdditiveOracle final : public Evaluator {
 public:
  // `sample_weights` is indexed by training row, `feature_weights` by column;
  // either may be empty (weight 0).
  AdditiveOracle(std::vector<double> sample_weights, std::vector<double> feature_weights,
                 double base, double noise_sd = 0.0, std::uint64_t seed = 0);
  std::string name() const override { return "additive_oracle"; }

  double value(const ContextSelection& ctx, std::uint64_t stream_key) const;

 protected:
  Prediction predict(const Table& train, const ContextSelection& ctx,
                     const Table& query) const override;
  double score(const Table& train, const ContextSelection& ctx, const Table& val,
               Metric metric, std::uint64_t stream_key) const override;

 private:
  std::vector<double> sample_weights_;
  std::vector<double> feature_weights_;
  double base_;
  double noise_sd_;
  std::uint64_t seed_;
};

}  // namespace vipcop
