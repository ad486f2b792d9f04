#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "vipcop/table.hpp"

namespace vipcop {

// Class-probability matrix, one row per query, row-major.
struct Prediction {
  std::size_t rows = 0;
  std::size_t classes = 0;
  std::vector<double> proba;

  Prediction() = default;
  Prediction(std::size_t rows, std::size_t classes)
      : rows(rows), classes(classes), proba(rows * classes, 0.0) {}

  std::span<double> row(std::size_t r) { return {proba.data() + r * classes, classes}; }
  std::span<const double> row(std::size_t r) const {
    return {proba.data() + r * classes, classes};
  }
  // Highest-probability class; ties go to the lowest class index.
  Label argmax(std::size_t r) const;
};

// Checks every row is finite, non-negative and sums to 1 within 1e-6. Rows
// off by at most 1e-3 are renormalized in place; anything worse throws
// EvaluatorError.
void validate_prediction(Prediction& pred);

enum class Metric { kBalancedAccuracy, kAuroc };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric metric);

// Mean per-class recall over the classes present in `truth`.
double balanced_accuracy(const Prediction& pred, std::span<const Label> truth);

// Binary: rank statistic of the class-1 probability with midranks for ties.
// Multiclass: unweighted one-vs-rest mean over the classes present in truth.
double auroc(const Prediction& pred, std::span<const Label> truth);

double compute_metric(Metric metric, const Prediction& pred, std::span<const Label> truth);

}  // namespace vipcop
