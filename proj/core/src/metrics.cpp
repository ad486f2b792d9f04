#include "vipcop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vipcop/error.hpp"

namespace vipcop {

Label Prediction::argmax(std::size_t r) const {
  auto p = row(r);
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = c;
  }
  return static_cast<Label>(best);
}

void validate_prediction(Prediction& pred) {
  if (pred.proba.size() != pred.rows * pred.classes) {
    throw EvaluatorError("prediction: shape mismatch");
  }
  for (std::size_t r = 0; r < pred.rows; ++r) {
    auto p = pred.row(r);
    double sum = 0.0;
    for (double& v : p) {
      if (!std::isfinite(v)) {
        throw EvaluatorError("prediction: non-finite probability in row " + std::to_string(r));
      }
      if (v < 0.0) {
        if (v < -1e-6) {
          throw EvaluatorError("prediction: negative probability in row " + std::to_string(r));
        }
        v = 0.0;
      }
      sum += v;
    }
    const double err = std::abs(sum - 1.0);
    if (err <= 1e-6) continue;
    if (err > 1e-3) {
      throw EvaluatorError("prediction: row " + std::to_string(r) + " sums to " +
                           std::to_string(sum));
    }
    for (double& v : p) v /= sum;
  }
}

Metric parse_metric(std::string_view name) {
  if (name == "bacc" || name == "balanced_accuracy") return Metric::kBalancedAccuracy;
  if (name == "auroc" || name == "auc") return Metric::kAuroc;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(Metric metric) {
  return metric == Metric::kAuroc ? "auroc" : "bacc";
}

double balanced_accuracy(const Prediction& pred, std::span<const Label> truth) {
  if (truth.empty()) throw EvaluatorError("balanced_accuracy: empty truth");
  if (truth.size() != pred.rows) throw EvaluatorError("balanced_accuracy: size mismatch");
  std::size_t k = pred.classes;
  for (Label y : truth) k = std::max<std::size_t>(k, y + 1);
  std::vector<std::size_t> total(k, 0), hit(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++total[truth[i]];
    if (pred.argmax(i) == truth[i]) ++hit[truth[i]];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return sum / static_cast<double>(present);
}

namespace {

// Mann-Whitney AUC of `score` for the positive set, midranks for ties.
double rank_auc(const std::vector<double>& score, const std::vector<bool>& positive) {
  const std::size_t n = score.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      pos_rank_sum += rank[i];
      n_pos += 1.0;
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

}  // namespace

double auroc(const Prediction& pred, std::span<const Label> truth) {
  if (truth.size() != pred.rows) throw EvaluatorError("auroc: size mismatch");
  std::vector<std::size_t> counts(std::max<std::size_t>(pred.classes, 2), 0);
  for (Label y : truth) {
    if (y >= counts.size()) counts.resize(y + 1, 0);
    ++counts[y];
  }
  const auto present = std::count_if(counts.begin(), counts.end(),
                                     [](std::size_t c) { return c > 0; });
  if (present < 2) throw EvaluatorError("auroc: fewer than two classes present");

  const std::size_t n = truth.size();
  std::vector<double> score(n);
  std::vector<bool> positive(n);
  if (pred.classes == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      score[i] = pred.row(i)[1];
      positive[i] = truth[i] == 1;
    }
    return rank_auc(score, positive);
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < pred.classes; ++c) {
    if (counts[c] == 0 || counts[c] == n) continue;
    for (std::size_t i = 0; i < n; ++i) {
      score[i] = pred.row(i)[c];
      positive[i] = truth[i] == c;
    }
    sum += rank_auc(score, positive);
    ++used;
  }
  return sum / static_cast<double>(used);
}

double compute_metric(Metric metric, const Prediction& pred, std::span<const Label> truth) {
  return metric == Metric::kAuroc ? auroc(pred, truth) : balanced_accuracy(pred, truth);
}

}  // namespace vipcop
