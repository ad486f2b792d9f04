#include "vipcop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "vipcop/error.hpp"
#include "vipcop/rng.hpp"

namespace vipcop {

namespace {

constexpr double kQ05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
constexpr double kQ10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};

constexpr std::size_t kExactLimit = 20;
constexpr std::size_t kChunk = 1 << 16;

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::vector<double> ScoreMatrix::column(std::size_t method) const {
  std::vector<double> out(datasets());
  for (std::size_t i = 0; i < datasets(); ++i) out[i] = at(i, method);
  return out;
}

std::size_t ScoreMatrix::method_index(const std::string& id) const {
  const auto it = std::find(method_ids.begin(), method_ids.end(), id);
  if (it == method_ids.end()) throw ConfigError("stats: unknown method '" + id + "'");
  return static_cast<std::size_t>(it - method_ids.begin());
}

void ScoreMatrix::validate() const {
  if (methods() < 2) throw DataError("stats: need at least 2 methods");
  if (datasets() < 1) throw DataError("stats: no datasets");
  if (scores.size() != datasets() * methods()) throw DataError("stats: score matrix shape");
  for (double v : scores) {
    if (!std::isfinite(v)) throw DataError("stats: missing or non-finite score");
  }
}

PermutationResult paired_permutation_test(std::span<const double> a, std::span<const double> b,
                                          std::size_t permutations, std::uint64_t seed) {
  if (a.size() != b.size()) throw DataError("permutation test: length mismatch");
  if (a.size() < 2) throw DataError("permutation test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double observed = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);

  PermutationResult result;
  result.statistic = observed;
  const bool all_zero = std::all_of(diff.begin(), diff.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    result.p_value = 1.0;
    return result;
  }
  // Compare sums; a relative slack absorbs summation-order rounding.
  const double target = std::abs(observed * static_cast<double>(n));
  const double slack = 1e-12 * std::max(1.0, target);
  auto extreme = [&](double sum) { return std::abs(sum) >= target - slack; };

  if (n <= kExactLimit) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += (mask >> i & 1U) ? -diff[i] : diff[i];
      if (extreme(sum)) ++hits;
    }
    result.exact = true;
    result.permutations = total;
    result.p_value = static_cast<double>(hits) / static_cast<double>(total);
    return result;
  }

  if (permutations < 1) throw ConfigError("permutation test: permutations must be at least 1");
  std::uint64_t hits = 1;  // the identity flip
  for (std::size_t chunk = 0; chunk * kChunk < permutations; ++chunk) {
    Stream rng = Stream::derive(seed, "permutation", chunk);
    const std::size_t end = std::min(permutations, (chunk + 1) * kChunk);
    for (std::size_t p = chunk * kChunk; p < end; ++p) {
      double sum = 0.0;
      std::uint64_t bits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) bits = rng.engine()();
        sum += (bits & 1U) ? -diff[i] : diff[i];
        bits >>= 1;
      }
      if (extreme(sum)) ++hits;
    }
  }
  result.exact = false;
  result.permutations = permutations;
  result.p_value = static_cast<double>(hits) / static_cast<double>(permutations + 1);
  return result;
}

std::vector<double> dataset_ranks(std::span<const double> scores) {
  const std::size_t k = scores.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  std::vector<double> ranks(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
    i = j + 1;
  }
  return ranks;
}

std::vector<double> average_ranks(const ScoreMatrix& matrix) {
  matrix.validate();
  const std::size_t k = matrix.methods();
  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < matrix.datasets(); ++i) {
    const auto r = dataset_ranks(std::span<const double>(matrix.scores).subspan(i * k, k));
    for (std::size_t m = 0; m < k; ++m) mean[m] += r[m];
  }
  for (double& v : mean) v /= static_cast<double>(matrix.datasets());
  return mean;
}

double nemenyi_q(std::size_t k, double alpha) {
  if (k < 2 || k > 10) {
    throw ConfigError("critical difference: k=" + std::to_string(k) + " outside 2..10");
  }
  if (std::abs(alpha - 0.05) < 1e-12) return kQ05[k - 2];
  if (std::abs(alpha - 0.10) < 1e-12) return kQ10[k - 2];
  throw ConfigError("critical difference: alpha must be 0.05 or 0.10");
}

double critical_difference(std::size_t k, std::size_t n, double alpha) {
  if (n < 2) throw ConfigError("critical difference: need at least 2 datasets");
  const double kd = static_cast<double>(k);
  return nemenyi_q(k, alpha) * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
}

std::vector<Improvement> improvement_report(const ScoreMatrix& matrix,
                                            const std::string& reference) {
  matrix.validate();
  const std::size_t ref = matrix.method_index(reference);
  std::vector<Improvement> out;
  for (std::size_t m = 0; m < matrix.methods(); ++m) {
    if (m == ref) continue;
    Improvement imp;
    imp.method = matrix.method_ids[m];
    double sum = 0.0;
    for (std::size_t i = 0; i < matrix.datasets(); ++i) {
      const double base = matrix.at(i, m);
      if (base == 0.0) {
        ++imp.excluded;
        continue;
      }
      sum += 100.0 * (matrix.at(i, ref) - base) / base;
      ++imp.used;
    }
    imp.mean_percent = imp.used ? sum / static_cast<double>(imp.used) : 0.0;
    out.push_back(std::move(imp));
  }
  return out;
}

StatsReport build_stats_report(const ScoreMatrix& matrix, const StatsOptions& options) {
  matrix.validate();
  StatsReport report;
  report.matrix = matrix;
  report.alpha = options.alpha;
  report.ranks = average_ranks(matrix);
  const std::size_t k = matrix.methods();
  if (matrix.datasets() >= 2 && k <= 10) {
    report.cd = critical_difference(k, matrix.datasets(), options.alpha);
  } else {
    report.cd = std::numeric_limits<double>::quiet_NaN();
  }
  report.pairwise_p.assign(k * k, 1.0);
  if (matrix.datasets() >= 2) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const auto p = paired_permutation_test(matrix.column(i), matrix.column(j),
                                               options.permutations, options.seed)
                           .p_value;
        report.pairwise_p[i * k + j] = report.pairwise_p[j * k + i] = p;
      }
    }
  }
  if (options.reference) {
    report.reference = options.reference;
    report.improvements = improvement_report(matrix, *options.reference);
  }
  return report;
}

std::string StatsReport::markdown() const {
  const std::size_t k = matrix.methods();
  std::ostringstream os;
  os << "# Benchmark summary\n\n";
  os << matrix.datasets() << " datasets, " << k << " methods.\n\n";
  os << "## Average ranks\n\n| method | mean score | average rank |\n|---|---|---|\n";
  for (std::size_t m = 0; m < k; ++m) {
    const auto col = matrix.column(m);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    os << "| " << matrix.method_ids[m] << " | " << fixed(mean) << " | " << fixed(ranks[m], 3)
       << " |\n";
  }
  os << "\nCritical difference (Nemenyi, alpha " << fixed(alpha, 2) << "): "
     << (std::isnan(cd) ? std::string("n/a") : fixed(cd, 3)) << "\n\n";
  os << "## Pairwise p-values (two-sided paired sign-flip test)\n\n|  |";
  for (const auto& id : matrix.method_ids) os << ' ' << id << " |";
  os << "\n|---|";
  for (std::size_t m = 0; m < k; ++m) os << "---|";
  os << '\n';
  for (std::size_t i = 0; i < k; ++i) {
    os << "| " << matrix.method_ids[i] << " |";
    for (std::size_t j = 0; j < k; ++j) os << ' ' << fixed(pairwise_p[i * k + j]) << " |";
    os << '\n';
  }
  if (reference) {
    os << "\n## Improvement of " << *reference << " (%)\n\n| baseline | mean % | datasets | excluded |\n|---|---|---|---|\n";
    for (const auto& imp : improvements) {
      os << "| " << imp.method << " | " << fixed(imp.mean_percent, 2) << " | " << imp.used
         << " | " << imp.excluded << " |\n";
    }
  }
  return os.str();
}

std::string StatsReport::rank_csv() const {
  std::ostringstream os;
  os << "dataset";
  for (const auto& id : matrix.method_ids) os << ',' << id;
  os << '\n';
  const std::size_t k = matrix.methods();
  for (std::size_t i = 0; i < matrix.datasets(); ++i) {
    const auto r = dataset_ranks(std::span<const double>(matrix.scores).subspan(i * k, k));
    os << matrix.dataset_ids[i];
    for (double v : r) os << ',' << v;
    os << '\n';
  }
  os << "average";
  for (double v : ranks) os << ',' << v;
  os << '\n';
  return os.str();
}

nlohmann::json StatsReport::to_json() const {
  nlohmann::json j;
  j["methods"] = matrix.method_ids;
  j["datasets"] = matrix.dataset_ids;
  j["scores"] = matrix.scores;
  j["ranks"] = ranks;
  j["CD"] = std::isnan(cd) ? nlohmann::json(nullptr) : nlohmann::json(cd);
  j["alpha"] = alpha;
  const std::size_t k = matrix.methods();
  nlohmann::json p = nlohmann::json::array();
  for (std::size_t i = 0; i < k; ++i) {
    p.push_back(std::vector<double>(pairwise_p.begin() + static_cast<std::ptrdiff_t>(i * k),
                                    pairwise_p.begin() + static_cast<std::ptrdiff_t>((i + 1) * k)));
  }
  j["pairwise_p"] = std::move(p);
  j["test"] = {{"kind", "paired sign-flip permutation"}, {"sided", "two-sided"}};
  if (reference) {
    nlohmann::json imp = nlohmann::json::array();
    for (const auto& i : improvements) {
      imp.push_back({{"method", i.method}, {"mean_percent", i.mean_percent}, {"used", i.used},
                     {"excluded", i.excluded}});
    }
    j["reference"] = *reference;
    j["improvements"] = std::move(imp);
  }
  return j;
}

}  // namespace vipcop
