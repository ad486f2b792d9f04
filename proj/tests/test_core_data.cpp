#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "support.hpp"
#include "vipcop/csv.hpp"
#include "vipcop/error.hpp"
#include "vipcop/table.hpp"
#include "vipcop/transforms.hpp"

using namespace vipcop;
using vipcop::testing::gaussian_blobs;

namespace {

Table parse(const std::string& text, LabelColumn label = std::string("y")) {
  std::istringstream in(text);
  return parse_csv(in, label);
}

double variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(Table, RejectsBrokenInvariants) {
  EXPECT_THROW(Table(2, 1, {1.0}, {0, 1}, 2), DataError);
  EXPECT_THROW(Table(2, 1, {1.0, 2.0}, {0}, 2), DataError);
  EXPECT_THROW(Table(2, 1, {1.0, 2.0}, {0, 1}, 1), DataError);
  EXPECT_THROW(Table(2, 1, {1.0, 2.0}, {0, 2}, 2), DataError);
  EXPECT_THROW(Table(2, 1, {1.0, NAN}, {0, 1}, 2), DataError);
  EXPECT_THROW(Table(2, 1, {1.0, INFINITY}, {0, 1}, 2), DataError);
}

TEST(Table, SubsetCarriesNamesAndProvenance) {
  Provenance prov{{0, 1, 0}, {1, 0}};
  Table t(3, 2, {1, 2, 3, 4, 5, 6}, {0, 1, 0}, 2, {"a", "b"}, {}, prov);
  const std::vector<std::size_t> rows{2, 1};
  const std::vector<std::size_t> cols{1};
  const Table s = t.subset(rows, cols);
  EXPECT_EQ(s.rows(), 2u);
  EXPECT_EQ(s.at(0, 0), 6.0);
  EXPECT_EQ(s.at(1, 0), 4.0);
  EXPECT_EQ(s.feature_names()[0], "b");
  EXPECT_FALSE(s.row_injected(0));
  EXPECT_TRUE(s.row_injected(1));
  EXPECT_FALSE(s.col_injected(0));
}

TEST(Csv, LabelsCodedByFirstAppearance) {
  const Table t = parse("x,y\n1,a\n2,b\n3,a\n");
  EXPECT_EQ(t.labels(), (std::vector<Label>{0, 1, 0}));
  EXPECT_EQ(t.class_count(), 2u);
  EXPECT_EQ(t.class_names()[0], "a");
}

TEST(Csv, MissingNumericImputedWithMean) {
  const Table t = parse("x,y\n1,a\n2,b\n\n4.5,a\nNA,b\n");
  EXPECT_DOUBLE_EQ(t.at(3, 0), 2.5);
}

TEST(Csv, MissingNumericFourRowFixture) {
  const Table t = parse("x,y\n1,a\n,b\n3,a\n3.5,b\n");
  EXPECT_DOUBLE_EQ(t.at(1, 0), 2.5);
}

TEST(Csv, SingleClassRejected) {
  try {
    parse("x,y\n1,a\n2,a\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("single-class"), std::string::npos);
  }
}

TEST(Csv, EmptyTableAndParseErrors) {
  EXPECT_THROW(parse(""), DataError);
  EXPECT_THROW(parse("x,y\n"), DataError);
  try {
    parse("x,y\n1,a\n2,b,9\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW(parse("x,y\n1,a\n", std::string("z")), DataError);
}

TEST(Csv, CategoricalFeaturesAndQuotes) {
  const Table t = parse("c,\"note, quoted\",y\nred,\"a \"\"b\"\"\",0\nblue,x,1\nred,,0\n");
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_EQ(t.at(0, 0), 0.0);
  EXPECT_EQ(t.at(1, 0), 1.0);
  EXPECT_EQ(t.at(2, 0), 0.0);
  EXPECT_EQ(t.feature_names()[1], "note, quoted");
  // Missing categorical gets its own code.
  EXPECT_EQ(t.at(2, 1), 2.0);
}

TEST(Csv, LabelByIndex) {
  const Table t = parse("y,x\na,1\nb,2\n", std::size_t{0});
  EXPECT_EQ(t.cols(), 1u);
  EXPECT_EQ(t.at(1, 0), 2.0);
  EXPECT_TRUE(std::holds_alternative<std::size_t>(parse_label_column("3")));
  EXPECT_TRUE(std::holds_alternative<std::string>(parse_label_column("target")));
}

TEST(Csv, SaveLoadRoundTrip) {
  vipcop::testing::TempDir dir("csv");
  Provenance prov{{0, 1, 0, 1}, {0, 1}};
  const Table t(4, 2, {0.1, 1e-300, -3.25, 7, 1.0 / 3.0, 2, 5, 6}, {0, 1, 2, 1}, 3, {"p", "q"},
                {"lo", "mid", "hi"}, prov);
  save_table(t, dir.path() / "t.csv");
  const Table u = load_table(dir.path() / "t.csv");
  EXPECT_EQ(u.values(), t.values());
  EXPECT_EQ(u.labels(), t.labels());
  EXPECT_EQ(u.class_names(), t.class_names());
  EXPECT_EQ(u.feature_names(), t.feature_names());
  EXPECT_EQ(u.provenance().injected_rows, prov.injected_rows);
  EXPECT_EQ(u.provenance().injected_cols, prov.injected_cols);
}

TEST(Split, ExactSizesAndDeterminism) {
  const Table t = gaussian_blobs(100, 2, 3);
  SplitSpec spec;
  spec.seed = 7;
  spec.stratified = false;
  const auto a = split(t, spec);
  EXPECT_EQ(a.train.rows(), 80u);
  EXPECT_EQ(a.val.rows(), 10u);
  EXPECT_EQ(a.test.rows(), 10u);
  const auto b = split(t, spec);
  EXPECT_EQ(a.train_rows, b.train_rows);
  EXPECT_EQ(a.val_rows, b.val_rows);
  EXPECT_EQ(a.test_rows, b.test_rows);
  std::set<std::size_t> all(a.train_rows.begin(), a.train_rows.end());
  all.insert(a.val_rows.begin(), a.val_rows.end());
  all.insert(a.test_rows.begin(), a.test_rows.end());
  EXPECT_EQ(all.size(), 100u);
}

TEST(Split, StratifiedKeepsRareClassEverywhere) {
  std::vector<double> x(100);
  std::vector<Label> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = static_cast<double>(i);
    y[i] = i < 10 ? 0 : 1;
  }
  const Table t(100, 1, x, y, 2);
  SplitSpec spec;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const auto s = split(t, spec);
    for (const Table* part : {&s.train, &s.val, &s.test}) {
      const auto counts = part->class_counts();
      EXPECT_GE(counts[0], 1u);
      EXPECT_GE(counts[1], 1u);
    }
    EXPECT_NEAR(static_cast<double>(s.train.class_counts()[0]), 8.0, 1.0);
  }
}

TEST(Split, RejectsBadFractions) {
  SplitSpec spec;
  spec.train_fraction = 0.9;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.train_fraction = 0.0;
  spec.val_fraction = 0.5;
  spec.test_fraction = 0.5;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(AugmentSamples, MixupArithmetic) {
  EXPECT_EQ(mixup_label(3, 4, 0.25), 3u);
  EXPECT_EQ(mixup_label(3, 4, 0.5), 3u);
  EXPECT_EQ(mixup_label(3, 4, 0.75), 4u);
  // x_k=(0,0), x_l=(2,2), alpha=0.25 -> (1.5,1.5)
  const double a = 0.25;
  EXPECT_DOUBLE_EQ(a * 0.0 + (1 - a) * 2.0, 1.5);
}

TEST(AugmentSamples, AppendOnlyAndLabelRule) {
  const Table t = gaussian_blobs(5, 3, 11);
  AugmentSpec spec;
  spec.target_n = 8;
  std::vector<MixupRecord> trace;
  const Table u = augment_samples(t, spec, &trace);
  ASSERT_EQ(u.rows(), 8u);
  ASSERT_EQ(trace.size(), 3u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(u.at(i, j), t.at(i, j));
    EXPECT_FALSE(u.row_injected(i));
  }
  for (std::size_t a = 0; a < 3; ++a) {
    const auto& r = trace[a];
    EXPECT_NE(r.first, r.second);
    EXPECT_GT(r.alpha, 0.0);
    EXPECT_LT(r.alpha, 1.0);
    EXPECT_TRUE(u.row_injected(5 + a));
    EXPECT_EQ(u.label(5 + a), mixup_label(t.label(r.first), t.label(r.second), r.alpha));
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(u.at(5 + a, j), r.alpha * t.at(r.first, j) + (1 - r.alpha) * t.at(r.second, j), 1e-12);
    }
  }
  const Table again = augment_samples(t, spec);
  EXPECT_EQ(again.values(), u.values());
}

TEST(AugmentSamples, Errors) {
  AugmentSpec spec;
  spec.target_n = 5;
  EXPECT_THROW(augment_samples(gaussian_blobs(5, 2, 1), spec), ConfigError);
  spec.target_n = 3;
  const Table one(1, 1, {1.0}, {0}, 2);
  EXPECT_THROW(augment_samples(one, spec), DataError);
}

TEST(AugmentFeatures, UnitProjectionCopiesFeature) {
  const Table t(2, 2, {1, 0, 0, 1}, {0, 1}, 2);
  const std::vector<double> r{1, 0};
  const Table u = project_features(t, r, 1);
  ASSERT_EQ(u.cols(), 3u);
  EXPECT_EQ(u.column(2), t.column(0));
  EXPECT_TRUE(u.col_injected(2));
  EXPECT_FALSE(u.col_injected(0));
}

TEST(AugmentFeatures, CountAndVariance) {
  const Table small = gaussian_blobs(10, 4, 5, 0.0);
  AugmentSpec spec;
  spec.kind = AugmentKind::kFeatureProjection;
  spec.target_d = 5;
  EXPECT_EQ(augment_features(small, spec).cols(), 5u);
  spec.target_d = 4;
  EXPECT_THROW(augment_features(small, spec), ConfigError);

  const Table t = gaussian_blobs(10000, 50, 5, 0.0);
  spec.target_d = 60;
  const Table u = augment_features(t, spec);
  ASSERT_EQ(u.cols(), 60u);
  double total_var = 0.0;
  for (std::size_t j = 0; j < 50; ++j) total_var += variance(t.column(j));
  const double expected = total_var / 10.0;
  // Each projected column's variance is a weighted chi-square around
  // `expected`; the mean over the ten columns concentrates.
  double mean_var = 0.0;
  for (std::size_t j = 50; j < 60; ++j) {
    mean_var += variance(u.column(j)) / 10.0;
    EXPECT_TRUE(u.col_injected(j));
  }
  EXPECT_GE(mean_var, 0.8 * expected);
  EXPECT_LE(mean_var, 1.2 * expected);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(u.at(i, 0), t.at(i, 0));
}

TEST(Noise, SampleKindsKeepSizeAndFlag) {
  const Table t = gaussian_blobs(200, 3, 8);
  for (NoiseKind kind : {NoiseKind::kS1Marginal, NoiseKind::kS2Gaussian}) {
    NoiseSpec spec;
    spec.kind = kind;
    NoiseTrace trace;
    const Table u = inject_noise(t, spec, &trace);
    EXPECT_EQ(u.rows(), 200u);
    EXPECT_EQ(trace.dropped.size(), 100u);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < u.rows(); ++i) flagged += u.row_injected(i);
    EXPECT_EQ(flagged, 100u);
    EXPECT_EQ(inject_noise(t, spec).values(), u.values());
  }
}

TEST(Noise, S1ConstantColumnStaysConstant) {
  Stream rng(1);
  std::vector<double> x(60);
  std::vector<Label> y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    x[2 * i] = 4.25;
    x[2 * i + 1] = rng.normal();
    y[i] = i % 2;
  }
  const Table t(30, 2, x, y, 2);
  const Table u = inject_noise(t, NoiseSpec{});
  for (std::size_t i = 0; i < u.rows(); ++i) EXPECT_EQ(u.at(i, 0), 4.25);
}

TEST(Noise, S1ValuesComeFromSurvivors) {
  const Table t = gaussian_blobs(50, 2, 2);
  NoiseTrace trace;
  const Table u = inject_noise(t, NoiseSpec{}, &trace);
  std::set<std::size_t> dropped(trace.dropped.begin(), trace.dropped.end());
  for (std::size_t j = 0; j < 2; ++j) {
    std::multiset<double> survivors;
    for (std::size_t i = 0; i < 50; ++i) {
      if (!dropped.count(i)) survivors.insert(t.at(i, j));
    }
    for (std::size_t i = 0; i < u.rows(); ++i) {
      if (u.row_injected(i)) EXPECT_TRUE(survivors.count(u.at(i, j)));
    }
  }
}

TEST(Noise, S2NeedsTwoSurvivors) {
  const Table t(2, 1, {1.0, 2.0}, {0, 1}, 2);
  NoiseSpec spec;
  spec.kind = NoiseKind::kS2Gaussian;
  spec.drop_fraction = 0.6;
  EXPECT_THROW(inject_noise(t, spec), DataError);
}

TEST(Noise, F2IsPermutationOfSource) {
  const Table t(3, 2, {1, 10, 2, 20, 3, 30}, {0, 1, 0}, 2);
  NoiseSpec spec;
  spec.kind = NoiseKind::kF2Permute;
  NoiseTrace trace;
  const Table u = inject_noise(t, spec, &trace);
  ASSERT_EQ(u.cols(), 2u);
  ASSERT_EQ(trace.sources.size(), 1u);
  auto injected = u.column(1);
  auto source = t.column(trace.sources[0]);
  std::sort(injected.begin(), injected.end());
  std::sort(source.begin(), source.end());
  EXPECT_EQ(injected, source);
  EXPECT_TRUE(u.col_injected(1));
}

TEST(Noise, F1VarianceIsTripled) {
  Stream rng(4);
  const std::size_t n = 10000;
  std::vector<double> x(2 * n);
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[2 * i] = rng.normal(0.0, std::sqrt(2.0));
    x[2 * i + 1] = rng.normal(0.0, std::sqrt(2.0));
    y[i] = i % 2;
  }
  const Table t(n, 2, x, y, 2);
  NoiseSpec spec;
  spec.kind = NoiseKind::kF1Jitter;
  NoiseTrace trace;
  const Table u = inject_noise(t, spec, &trace);
  const auto src = t.column(trace.sources[0]);
  const auto out = u.column(1);
  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) noise[i] = out[i] - src[i];
  const double target = 3.0 * variance(src);
  EXPECT_GE(variance(noise), 0.9 * target);
  EXPECT_LE(variance(noise), 1.1 * target);
}

TEST(Noise, FMixedUsesBothSchemes) {
  const Table t = gaussian_blobs(20, 40, 3);
  NoiseSpec spec;
  spec.kind = NoiseKind::kFMixed;
  NoiseTrace trace;
  const Table u = inject_noise(t, spec, &trace);
  EXPECT_EQ(u.cols(), 40u);
  const auto f1 = std::count(trace.schemes.begin(), trace.schemes.end(), NoiseKind::kF1Jitter);
  EXPECT_GT(f1, 0);
  EXPECT_LT(f1, 20);
}

TEST(Noise, MirrorMatchesColumnLayout) {
  const Table t = gaussian_blobs(40, 6, 9);
  const Table v = gaussian_blobs(10, 6, 10);
  NoiseSpec spec;
  spec.kind = NoiseKind::kFMixed;
  NoiseTrace trace;
  const Table u = inject_noise(t, spec, &trace);
  const Table w = mirror_feature_noise(v, trace, 1);
  ASSERT_EQ(w.cols(), u.cols());
  EXPECT_EQ(w.feature_names(), u.feature_names());
  for (std::size_t j = 0; j < w.cols(); ++j) EXPECT_EQ(w.col_injected(j), u.col_injected(j));
}

TEST(Noise, DropFractionValidated) {
  NoiseSpec spec;
  spec.drop_fraction = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.drop_fraction = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(parse_noise_kind("s9"), ConfigError);
}
