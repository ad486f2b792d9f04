#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vipcop {

// Scores of methods (columns) on datasets (rows), row-major.
struct ScoreMatrix {
  std::vector<std::string> dataset_ids;
  std::vector<std::string> method_ids;
  std::vector<double> scores;

  std::size_t datasets() const { return dataset_ids.size(); }
  std::size_t methods() const { return method_ids.size(); }
  double at(std::size_t dataset, std::size_t method) const {
    return scores[dataset * methods() + method];
  }
  std::vector<double> column(std::size_t method) const;
  std::size_t method_index(const std::string& id) const;

  // At least 2 methods, at least one dataset, every cell finite.
  void validate() const;
};

struct PermutationResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool exact = true;
  std::size_t permutations = 0;
};

// Two-sided paired sign-flip test on mean(a - b). Exact enumeration for up to
// 20 pairs, otherwise `permutations` random flips plus the identity.
PermutationResult paired_permutation_test(std::span<const double> a, std::span<const double> b,
                                          std::size_t permutations = 1000000,
                                          std::uint64_t seed = 42);

// Per dataset rank 1 is the best score; ties share their midrank.
std::vector<double> dataset_ranks(std::span<const double> scores);
std::vector<double> average_ranks(const ScoreMatrix& matrix);

// Nemenyi critical difference; alpha is 0.05 or 0.10, 2 <= k <= 10.
double nemenyi_q(std::size_t k, double alpha = 0.05);
double critical_difference(std::size_t k, std::size_t n, double alpha = 0.05);

struct Improvement {
  std::string method;
  double mean_percent = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

// Mean over datasets of 100 * (ref - base) / base per other method; datasets
// where base is 0 are skipped and counted.
std::vector<Improvement> improvement_report(const ScoreMatrix& matrix,
                                            const std::string& reference);

struct StatsOptions {
  std::optional<std::string> reference;
  double alpha = 0.05;
  std::size_t permutations = 1000000;
  std::uint64_t seed = 42;
};

struct StatsReport {
  ScoreMatrix matrix;
  std::vector<double> ranks;
  double cd = 0.0;
  double alpha = 0.05;
  // pairwise_p[i * k + j]; 1 on the diagonal.
  std::vector<double> pairwise_p;
  std::optional<std::string> reference;
  std::vector<Improvement> improvements;

  std::string markdown() const;
  std::string rank_csv() const;
  nlohmann::json to_json() const;
};

StatsReport build_stats_report(const ScoreMatrix& matrix, const StatsOptions& options = {});

}  // namespace vipcop
