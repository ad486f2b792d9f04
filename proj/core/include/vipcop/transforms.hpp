#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vipcop/table.hpp"

namespace vipcop {

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 42;
  bool stratified = true;

  void validate() const;
};

struct SplitResult {
  Table train;
  Table val;
  Table test;
  // Source row indices of each split, ascending.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::size_t> test_rows;
};

// Disjoint, deterministic partition of the rows. Split sizes are the rounded
// fractions (train takes the remainder); stratified mode applies the same
// rule per class and keeps at least one row of every class in every split
// when the class has three or more rows.
SplitResult split(const Table& table, const SplitSpec& spec);

enum class AugmentKind { kSampleAffine, kFeatureProjection };

struct AugmentSpec {
  AugmentKind kind = AugmentKind::kSampleAffine;
  std::size_t target_n = 0;  // kSampleAffine
  std::size_t target_d = 0;  // kFeatureProjection
  std::uint64_t seed = 42;
};

// How an appended row was mixed: x = alpha * x[first] + (1 - alpha) * x[second].
struct MixupRecord {
  std::size_t first = 0;
  std::size_t second = 0;
  double alpha = 0.0;
};

// Label of a mixed row: the first source's label when alpha <= 0.5, else the
// second's.
inline Label mixup_label(Label first, Label second, double alpha) {
  return alpha <= 0.5 ? first : second;
}

// Appends target_n - n mixed rows. When `trace` is non-null it receives one
// record per appended row.
Table augment_samples(const Table& table, const AugmentSpec& spec,
                      std::vector<MixupRecord>* trace = nullptr);

// Appends target_d - d columns X * R with R_ij ~ N(0, 1 / (target_d - d)).
Table augment_features(const Table& table, const AugmentSpec& spec);

// Appends the columns X * projection, where projection is row-major
// d x extra. Original columns stay first.
Table project_features(const Table& table, std::span<const double> projection,
                       std::size_t extra);

enum class NoiseKind { kS1Marginal, kS2Gaussian, kF1Jitter, kF2Permute, kFMixed };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind);
inline bool is_sample_noise(NoiseKind k) {
  return k == NoiseKind::kS1Marginal || k == NoiseKind::kS2Gaussian;
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kS1Marginal;
  double drop_fraction = 0.5;
  std::uint64_t seed = 42;

  void validate() const;
};

// What inject_noise did: the dropped source rows/columns and, for feature
// kinds, the surviving source column (index in the input) and scheme behind
// each injected column.
struct NoiseTrace {
  std::vector<std::size_t> dropped;
  std::vector<std::size_t> sources;
  std::vector<NoiseKind> schemes;
};

// Drops floor(drop_fraction * size) rows (sample kinds) or columns (feature
// kinds) and appends the same number of noisy ones, so the size is unchanged.
Table inject_noise(const Table& table, const NoiseSpec& spec,
                   NoiseTrace* trace = nullptr);

// Gives another split of the same data the column layout a feature-noise
// trace produced: the same columns dropped, and per injected column the same
// source and scheme applied to this table's own values (fresh noise).
Table mirror_feature_noise(const Table& table, const NoiseTrace& trace, std::uint64_t seed);

}  // namespace vipcop
