#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vipcop/evaluator.hpp"
#include "vipcop/metrics.hpp"
#include "vipcop/table.hpp"

namespace vipcop {

enum class BaselineKind { kRandomMean, kEnsemble, kXlContext, kKMeansReps, kDtRouter };

// Short method ids h1..o2 and the long names are both accepted.
BaselineKind parse_baseline(std::string_view name);
std::string_view method_id(BaselineKind kind);
std::string_view method_name(BaselineKind kind);
inline constexpr BaselineKind kAllBaselines[] = {
    BaselineKind::kRandomMean, BaselineKind::kEnsemble, BaselineKind::kXlContext,
    BaselineKind::kKMeansReps, BaselineKind::kDtRouter};

// How dt_router picks features when d exceeds the budget: a uniform random
// subset, or the split features of a top-3-gain randomized tree.
enum class RouterFeatures { kRandom, kTree };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kRandomMean;
  // Runs for random_mean / ensemble (15 and 20 by default).
  std::size_t runs = 15;
  double backoff = 0.9;
  // Seeded repetitions for kmeans_reps and dt_router, best kept by validation.
  std::size_t inits = 5;
  // Leaf size floor for dt_router; unset means the sample budget.
  std::optional<std::size_t> min_leaf;
  std::size_t max_depth = 50;
  std::size_t top_splits = 3;
  RouterFeatures router_features = RouterFeatures::kRandom;
  std::uint64_t seed = 42;
  Metric metric = Metric::kBalancedAccuracy;

  static BaselineSpec defaults(BaselineKind kind);
  void validate() const;
};

struct BaselineReport {
  std::string method;
  double score = 0.0;
  std::optional<double> val_score;
  std::vector<double> per_run_scores;
  // Final context (dt_router: the largest leaf context).
  std::size_t context_samples = 0;
  std::size_t context_features = 0;
  std::optional<ContextSelection> selection;
  // xl_context: sample counts tried, in order.
  std::vector<std::size_t> attempts;
  // ensemble: the averaged test probabilities.
  std::optional<Prediction> proba;
  double wall_time = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json details = nlohmann::json::object();
};

BaselineReport random_mean(const Table& train, const Table& val, const Table& test,
                           const Evaluator& evaluator, const Budget& budget,
                           const BaselineSpec& spec);
BaselineReport ensemble(const Table& train, const Table& val, const Table& test,
                        const Evaluator& evaluator, const Budget& budget,
                        const BaselineSpec& spec);
BaselineReport xl_context(const Table& train, const Table& val, const Table& test,
                          const Evaluator& evaluator, const Budget& budget,
                          const BaselineSpec& spec);
BaselineReport kmeans_reps(const Table& train, const Table& val, const Table& test,
                           const Evaluator& evaluator, const Budget& budget,
                           const BaselineSpec& spec);
BaselineReport dt_router(const Table& train, const Table& val, const Table& test,
                         const Evaluator& evaluator, const Budget& budget,
                         const BaselineSpec& spec);

BaselineReport run_baseline(const Table& train, const Table& val, const Table& test,
                            const Evaluator& evaluator, const Budget& budget,
                            const BaselineSpec& spec);

// Elementwise mean of probability matrices of equal shape.
Prediction average_predictions(std::span<const Prediction> preds);

// Sample counts floor(backoff^k * n) for k = 1, 2, ... down to 1 (inclusive).
std::vector<std::size_t> backoff_sizes(std::size_t n, double backoff);

// Tree-routed prediction: each query row is answered by the context of its
// leaf (rows truncated to the first `max_rows`) over `features`.
Prediction routed_predict(const Table& train, const Table& query, const Evaluator& evaluator,
                          std::span<const std::size_t> features, std::size_t min_leaf,
                          std::size_t max_rows, std::vector<std::size_t>* leaf_sizes = nullptr);

nlohmann::json report_row(const BaselineReport& report, std::string_view dataset,
                          std::string_view setting);

}  // namespace vipcop
