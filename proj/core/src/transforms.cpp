#include "vipcop/transforms.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "vipcop/error.hpp"
#include "vipcop/rng.hpp"

namespace vipcop {

namespace {

std::size_t round_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& sorted_removed) {
  std::vector<std::size_t> out;
  out.reserve(n - sorted_removed.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (k < sorted_removed.size() && sorted_removed[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

// Survivor rows of `table` followed by `extra` appended rows.
Table append_rows(const Table& table, const std::vector<std::size_t>& keep,
                  const std::vector<double>& extra_values,
                  const std::vector<Label>& extra_labels) {
  const std::size_t d = table.cols();
  const std::size_t total = keep.size() + extra_labels.size();
  std::vector<double> values;
  values.reserve(total * d);
  std::vector<Label> labels;
  labels.reserve(total);
  Provenance prov;
  prov.injected_cols = table.provenance().injected_cols;
  for (std::size_t r : keep) {
    auto row = table.row(r);
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(table.label(r));
    prov.injected_rows.push_back(table.provenance().injected_rows[r]);
  }
  values.insert(values.end(), extra_values.begin(), extra_values.end());
  labels.insert(labels.end(), extra_labels.begin(), extra_labels.end());
  prov.injected_rows.resize(total, 1);
  return Table(total, d, std::move(values), std::move(labels), table.class_count(),
               table.feature_names(), table.class_names(), std::move(prov));
}

// Survivor columns of `table` followed by appended columns (column-major).
Table append_cols(const Table& table, const std::vector<std::size_t>& keep,
                  const std::vector<std::vector<double>>& extra,
                  const std::vector<std::string>& extra_names) {
  const std::size_t n = table.rows();
  const std::size_t d = keep.size() + extra.size();
  std::vector<double> values;
  values.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c : keep) values.push_back(table.at(i, c));
    for (const auto& col : extra) values.push_back(col[i]);
  }
  std::vector<std::string> names;
  Provenance prov;
  prov.injected_rows = table.provenance().injected_rows;
  for (std::size_t c : keep) {
    names.push_back(table.feature_names()[c]);
    prov.injected_cols.push_back(table.provenance().injected_cols[c]);
  }
  names.insert(names.end(), extra_names.begin(), extra_names.end());
  prov.injected_cols.resize(d, 1);
  return Table(n, d, std::move(values), table.labels(), table.class_count(),
               std::move(names), table.class_names(), std::move(prov));
}

}  // namespace

void SplitSpec::validate() const {
  if (!(train_fraction > 0 && val_fraction > 0 && test_fraction > 0)) {
    throw ConfigError("split: fractions must be positive");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
}

SplitResult split(const Table& table, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = table.rows();
  SplitResult out;
  auto assign = [&](std::vector<std::size_t> rows, std::size_t n_val, std::size_t n_test) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k < n_val) {
        out.val_rows.push_back(rows[k]);
      } else if (k < n_val + n_test) {
        out.test_rows.push_back(rows[k]);
      } else {
        out.train_rows.push_back(rows[k]);
      }
    }
  };

  if (!spec.stratified) {
    auto rows = iota_indices(n);
    Stream::derive(spec.seed, "split").shuffle(rows.begin(), rows.end());
    const std::size_t n_val = round_count(spec.val_fraction, n);
    const std::size_t n_test = round_count(spec.test_fraction, n);
    if (n_val + n_test >= n) throw DataError("split: training split would be empty");
    assign(std::move(rows), n_val, n_test);
  } else {
    std::vector<std::vector<std::size_t>> by_class(table.class_count());
    for (std::size_t i = 0; i < n; ++i) by_class[table.label(i)].push_back(i);
    for (std::uint32_t c = 0; c < table.class_count(); ++c) {
      auto& rows = by_class[c];
      const std::size_t m = rows.size();
      if (m == 0) continue;
      Stream::derive(spec.seed, "split", c).shuffle(rows.begin(), rows.end());
      std::size_t n_val = round_count(spec.val_fraction, m);
      std::size_t n_test = round_count(spec.test_fraction, m);
      if (m >= 3) {
        n_val = std::max<std::size_t>(n_val, 1);
        n_test = std::max<std::size_t>(n_test, 1);
      }
      // Training keeps at least one row of the class.
      while (n_val + n_test >= m && n_val + n_test > 0) {
        if (n_test >= n_val && n_test > 0) {
          --n_test;
        } else {
          --n_val;
        }
      }
      assign(std::move(rows), n_val, n_test);
    }
  }
  if (out.train_rows.empty() || out.val_rows.empty() || out.test_rows.empty()) {
    throw DataError("split: a split is empty (" + std::to_string(out.train_rows.size()) + "/" +
                    std::to_string(out.val_rows.size()) + "/" +
                    std::to_string(out.test_rows.size()) + ")");
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.val_rows.begin(), out.val_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = table.select_rows(out.train_rows);
  out.val = table.select_rows(out.val_rows);
  out.test = table.select_rows(out.test_rows);
  return out;
}

Table augment_samples(const Table& table, const AugmentSpec& spec,
                      std::vector<MixupRecord>* trace) {
  if (spec.kind != AugmentKind::kSampleAffine) {
    throw ConfigError("augment_samples: augment kind must be sample_affine");
  }
  const std::size_t n = table.rows();
  const std::size_t d = table.cols();
  if (n < 2) throw DataError("augment_samples: need at least 2 rows");
  if (spec.target_n <= n) {
    throw ConfigError("augment_samples: target_n (" + std::to_string(spec.target_n) +
                      ") must exceed the current row count (" + std::to_string(n) + ")");
  }
  const std::size_t extra = spec.target_n - n;
  Stream rng = Stream::derive(spec.seed, "augment_samples");
  std::vector<double> values;
  values.reserve(extra * d);
  std::vector<Label> labels;
  labels.reserve(extra);
  if (trace) trace->clear();
  for (std::size_t a = 0; a < extra; ++a) {
    const std::size_t k = rng.index(n);
    std::size_t l = rng.index(n - 1);
    if (l >= k) ++l;
    const double alpha = rng.uniform_open();
    auto xk = table.row(k);
    auto xl = table.row(l);
    for (std::size_t j = 0; j < d; ++j) values.push_back(alpha * xk[j] + (1.0 - alpha) * xl[j]);
    labels.push_back(mixup_label(table.label(k), table.label(l), alpha));
    if (trace) trace->push_back({k, l, alpha});
  }
  return append_rows(table, iota_indices(n), values, labels);
}

Table project_features(const Table& table, std::span<const double> projection,
                       std::size_t extra) {
  const std::size_t n = table.rows();
  const std::size_t d = table.cols();
  if (projection.size() != d * extra) {
    throw DataError("project_features: projection must be d x extra");
  }
  std::vector<std::vector<double>> cols(extra, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    auto x = table.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double xj = x[j];
      const double* r = projection.data() + j * extra;
      for (std::size_t a = 0; a < extra; ++a) cols[a][i] += xj * r[a];
    }
  }
  std::vector<std::string> names;
  for (std::size_t a = 0; a < extra; ++a) names.push_back("proj" + std::to_string(a));
  return append_cols(table, iota_indices(d), cols, names);
}

Table augment_features(const Table& table, const AugmentSpec& spec) {
  if (spec.kind != AugmentKind::kFeatureProjection) {
    throw ConfigError("augment_features: augment kind must be feature_projection");
  }
  const std::size_t d = table.cols();
  if (d < 1) throw DataError("augment_features: need at least 1 column");
  if (spec.target_d <= d) {
    throw ConfigError("augment_features: target_d (" + std::to_string(spec.target_d) +
                      ") must exceed the current column count (" + std::to_string(d) + ")");
  }
  const std::size_t extra = spec.target_d - d;
  const double sd = std::sqrt(1.0 / static_cast<double>(extra));
  Stream rng = Stream::derive(spec.seed, "augment_features");
  std::vector<double> projection(d * extra);
  for (double& r : projection) r = rng.normal(0.0, sd);
  return project_features(table, projection, extra);
}

NoiseKind parse_noise_kind(std::string_view text) {
  std::string name(text);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (name == "s1" || name == "s1_marginal") return NoiseKind::kS1Marginal;
  if (name == "s2" || name == "s2_gaussian") return NoiseKind::kS2Gaussian;
  if (name == "f1" || name == "f1_jitter") return NoiseKind::kF1Jitter;
  if (name == "f2" || name == "f2_permute") return NoiseKind::kF2Permute;
  if (name == "f" || name == "f_mixed") return NoiseKind::kFMixed;
  throw ConfigError("unknown noise kind '" + std::string(text) + "'");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kS1Marginal: return "s1_marginal";
    case NoiseKind::kS2Gaussian: return "s2_gaussian";
    case NoiseKind::kF1Jitter: return "f1_jitter";
    case NoiseKind::kF2Permute: return "f2_permute";
    case NoiseKind::kFMixed: return "f_mixed";
  }
  return "?";
}

void NoiseSpec::validate() const {
  if (!(drop_fraction > 0.0 && drop_fraction < 1.0)) {
    throw ConfigError("noise: drop_fraction must lie in (0, 1)");
  }
}

Table inject_noise(const Table& table, const NoiseSpec& spec, NoiseTrace* trace) {
  spec.validate();
  const std::size_t n = table.rows();
  const std::size_t d = table.cols();
  Stream rng = Stream::derive(spec.seed, "inject_noise");
  NoiseTrace local;
  NoiseTrace& tr = trace ? *trace : local;
  tr = NoiseTrace{};

  if (is_sample_noise(spec.kind)) {
    if (n < 2) throw DataError("inject_noise: sample noising needs at least 2 rows");
    const auto m = static_cast<std::size_t>(std::floor(spec.drop_fraction * static_cast<double>(n)));
    tr.dropped = rng.choose(n, m);
    const auto keep = complement(n, tr.dropped);
    const std::size_t s = keep.size();
    std::vector<double> values;
    values.reserve(m * d);
    std::vector<Label> labels;
    labels.reserve(m);

    if (spec.kind == NoiseKind::kS1Marginal) {
      for (std::size_t a = 0; a < m; ++a) {
        labels.push_back(table.label(keep[rng.index(s)]));
        for (std::size_t j = 0; j < d; ++j) values.push_back(table.at(keep[rng.index(s)], j));
      }
    } else {
      if (s < 2) {
        throw DataError("inject_noise: covariance estimation needs at least 2 surviving rows");
      }
      Eigen::MatrixXd x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = table.at(keep[i], j);
      }
      const Eigen::RowVectorXd mean = x.colwise().mean();
      const Eigen::MatrixXd centered = x.rowwise() - mean;
      Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(s - 1);
      const double ridge = std::max(1e-6 * cov.trace() / static_cast<double>(d), 1e-12);
      cov.diagonal().array() += ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) {
        throw DataError("inject_noise: covariance is not positive definite");
      }
      const Eigen::MatrixXd lower = llt.matrixL();
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (std::size_t a = 0; a < m; ++a) {
        labels.push_back(table.label(keep[rng.index(s)]));
        for (std::size_t j = 0; j < d; ++j) z(j) = rng.normal();
        const Eigen::VectorXd sample = mean.transpose() + lower * z;
        for (std::size_t j = 0; j < d; ++j) values.push_back(sample(j));
      }
    }
    return append_rows(table, keep, values, labels);
  }

  if (d < 2) throw DataError("inject_noise: feature noising needs at least 2 columns");
  const auto m = static_cast<std::size_t>(std::floor(spec.drop_fraction * static_cast<double>(d)));
  tr.dropped = rng.choose(d, m);
  const auto keep = complement(d, tr.dropped);
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t src = keep[rng.index(keep.size())];
    NoiseKind scheme = spec.kind;
    if (scheme == NoiseKind::kFMixed) {
      scheme = rng.uniform() < 0.5 ? NoiseKind::kF1Jitter : NoiseKind::kF2Permute;
    }
    auto col = table.column(src);
    if (scheme == NoiseKind::kF1Jitter) {
      const double sd = std::sqrt(3.0 * sample_variance(col));
      for (double& v : col) v += rng.normal(0.0, sd);
      names.push_back(table.feature_names()[src] + "~f1");
    } else {
      rng.shuffle(col.begin(), col.end());
      names.push_back(table.feature_names()[src] + "~f2");
    }
    cols.push_back(std::move(col));
    tr.sources.push_back(src);
    tr.schemes.push_back(scheme);
  }
  return append_cols(table, keep, cols, names);
}

Table mirror_feature_noise(const Table& table, const NoiseTrace& trace, std::uint64_t seed) {
  if (trace.sources.size() != trace.schemes.size() || trace.sources.size() != trace.dropped.size()) {
    throw ConfigError("mirror_feature_noise: inconsistent trace");
  }
  const std::size_t d = table.cols();
  for (std::size_t j : trace.dropped) {
    if (j >= d) throw DataError("mirror_feature_noise: dropped column out of range");
  }
  const auto keep = complement(d, trace.dropped);
  Stream rng = Stream::derive(seed, "mirror_feature_noise");
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;
  for (std::size_t a = 0; a < trace.sources.size(); ++a) {
    const std::size_t src = trace.sources[a];
    if (src >= d) throw DataError("mirror_feature_noise: source column out of range");
    auto col = table.column(src);
    if (trace.schemes[a] == NoiseKind::kF1Jitter) {
      const double sd = std::sqrt(3.0 * sample_variance(col));
      for (double& v : col) v += rng.normal(0.0, sd);
      names.push_back(table.feature_names()[src] + "~f1");
    } else if (trace.schemes[a] == NoiseKind::kF2Permute) {
      rng.shuffle(col.begin(), col.end());
      names.push_back(table.feature_names()[src] + "~f2");
    } else {
      throw ConfigError("mirror_feature_noise: trace scheme must be f1 or f2");
    }
    cols.push_back(std::move(col));
  }
  return append_cols(table, keep, cols, names);
}

}  // namespace vipcop
