#include "vipcop/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vipcop/error.hpp"
#include "vipcop/rng.hpp"

namespace vipcop {

namespace {

void check_unique_in_range(const std::vector<std::size_t>& idx, std::size_t limit,
                           const char* what) {
  if (idx.empty()) throw EvaluatorError(std::string("context: no ") + what);
  std::vector<std::size_t> sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.back() >= limit) {
    throw EvaluatorError(std::string("context: ") + what + " index " +
                         std::to_string(sorted.back()) + " out of range (" +
                         std::to_string(limit) + ")");
  }
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw EvaluatorError(std::string("context: duplicate ") + what + " index");
  }
}

}  // namespace

void ContextSelection::validate(const Table& train) const {
  check_unique_in_range(samples, train.rows(), "samples");
  check_unique_in_range(features, train.cols(), "features");
}

ContextSelection ContextSelection::full(const Table& train) {
  return {iota_indices(train.rows()), iota_indices(train.cols())};
}

void Budget::validate() const {
  if (max_samples < 1 || max_features < 1) {
    throw ConfigError("budget: max_samples and max_features must be at least 1");
  }
}

Prediction Evaluator::score_context(const Table& train, const ContextSelection& ctx,
                                    const Table& query) const {
  ctx.validate(train);
  if (query.cols() != train.cols()) {
    throw EvaluatorError("score_context: query has " + std::to_string(query.cols()) +
                         " columns, train has " + std::to_string(train.cols()));
  }
  calls_.fetch_add(1);
  Prediction pred = predict(train, ctx, query);
  if (pred.rows != query.rows() || pred.classes != train.class_count()) {
    throw EvaluatorError("score_context: prediction shape " + std::to_string(pred.rows) + "x" +
                         std::to_string(pred.classes) + ", expected " +
                         std::to_string(query.rows()) + "x" +
                         std::to_string(train.class_count()));
  }
  validate_prediction(pred);
  return pred;
}

double Evaluator::score_subset(const Table& train, const ContextSelection& ctx,
                               const Table& val, Metric metric,
                               std::uint64_t stream_key) const {
  ctx.validate(train);
  calls_.fetch_add(1);
  const double p = score(train, ctx, val, metric, stream_key);
  if (!std::isfinite(p)) throw EvaluatorError("score_subset: non-finite score");
  return std::clamp(p, 0.0, 1.0);
}

double Evaluator::score(const Table& train, const ContextSelection& ctx, const Table& val,
                        Metric metric, std::uint64_t /*stream_key*/) const {
  if (val.cols() != train.cols()) throw EvaluatorError("score: feature universe mismatch");
  Prediction pred = predict(train, ctx, val);
  if (pred.rows != val.rows() || pred.classes != train.class_count()) {
    throw EvaluatorError("score: prediction shape mismatch");
  }
  validate_prediction(pred);
  return compute_metric(metric, pred, val.labels());
}

KnnEvaluator::KnnEvaluator(std::size_t k, std::optional<Budget> capacity)
    : k_(k), capacity_(capacity) {
  if (k_ < 1) throw ConfigError("knn: k must be at least 1");
}

std::string KnnEvaluator::name() const { return "knn(k=" + std::to_string(k_) + ")"; }

Prediction KnnEvaluator::predict(const Table& train, const ContextSelection& ctx,
                                 const Table& query) const {
  const std::size_t m = ctx.samples.size();
  const std::size_t f = ctx.features.size();
  if (capacity_ && (m > capacity_->max_samples || f > capacity_->max_features)) {
    throw CapacityExceeded("capacity");
  }
  // Gather the context and queries into contiguous buffers.
  std::vector<double> cx(m * f);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = train.row(ctx.samples[i]);
    for (std::size_t j = 0; j < f; ++j) cx[i * f + j] = row[ctx.features[j]];
  }
  std::vector<double> qx(f);
  const std::size_t k = std::min(k_, m);
  const std::size_t classes = train.class_count();
  Prediction pred(query.rows(), classes);

  struct Neighbour {
    double d2;
    std::size_t row;
    std::size_t pos;
  };
  auto closer = [](const Neighbour& a, const Neighbour& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.row < b.row);
  };
  std::vector<Neighbour> best;
  best.reserve(k + 1);

  for (std::size_t q = 0; q < query.rows(); ++q) {
    auto row = query.row(q);
    for (std::size_t j = 0; j < f; ++j) qx[j] = row[ctx.features[j]];
    best.clear();
    for (std::size_t i = 0; i < m; ++i) {
      const double* c = cx.data() + i * f;
      double d2 = 0.0;
      for (std::size_t j = 0; j < f; ++j) {
        const double diff = qx[j] - c[j];
        d2 += diff * diff;
      }
      Neighbour cand{d2, ctx.samples[i], i};
      if (best.size() == k && !closer(cand, best.back())) continue;
      auto it = std::upper_bound(best.begin(), best.end(), cand, closer);
      best.insert(it, cand);
      if (best.size() > k) best.pop_back();
    }
    auto out = pred.row(q);
    double total = 0.0;
    for (const auto& nb : best) {
      const double w = 1.0 / (std::sqrt(nb.d2) + 1e-9);
      out[train.label(nb.row)] += w;
      total += w;
    }
    for (double& p : out) p /= total;
  }
  return pred;
}

AdditiveOracle::AdditiveOracle(std::vector<double> sample_weights,
                               std::vector<double> feature_weights, double base,
                               double noise_sd, std::uint64_t seed)
    : sample_weights_(std::move(sample_weights)),
      feature_weights_(std::move(feature_weights)),
      base_(base),
      noise_sd_(noise_sd),
      seed_(seed) {
  if (noise_sd_ < 0) throw ConfigError("additive_oracle: noise_sd must be non-negative");
}

double AdditiveOracle::value(const ContextSelection& ctx, std::uint64_t stream_key) const {
  double v = base_;
  for (std::size_t i : ctx.samples) {
    if (i < sample_weights_.size()) v += sample_weights_[i];
  }
  for (std::size_t j : ctx.features) {
    if (j < feature_weights_.size()) v += feature_weights_[j];
  }
  if (noise_sd_ > 0) v += Stream::derive(seed_, "oracle", stream_key).normal(0.0, noise_sd_);
  return std::clamp(v, 0.0, 1.0);
}

Prediction AdditiveOracle::predict(const Table&, const ContextSelection&, const Table&) const {
  throw EvaluatorError("additive_oracle produces scores only, not class probabilities");
}

double AdditiveOracle::score(const Table&, const ContextSelection& ctx, const Table&, Metric,
                             std::uint64_t stream_key) const {
  return value(ctx, stream_key);
}

}  // namespace vipcop
