#include "vipcop/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "vipcop/error.hpp"
#include "vipcop/kmeans.hpp"
#include "vipcop/rng.hpp"
#include "vipcop/tree.hpp"

namespace vipcop {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> pick(std::size_t count, std::size_t cap, Stream rng) {
  if (count <= cap) return iota_indices(count);
  return rng.choose(count, cap);
}

double test_metric(const Table& train, const ContextSelection& ctx, const Table& query,
                   const Evaluator& evaluator, Metric metric, Prediction* keep = nullptr) {
  Prediction pred = evaluator.score_context(train, ctx, query);
  const double v = compute_metric(metric, pred, query.labels());
  if (keep) *keep = std::move(pred);
  return v;
}

void check_inputs(const Table& train, const Table& val, const Table& test, const Budget& budget,
                  const BaselineSpec& spec) {
  spec.validate();
  budget.validate();
  if (val.cols() != train.cols() || test.cols() != train.cols()) {
    throw DataError("baseline: train/val/test feature counts differ");
  }
}

json indices(const std::vector<std::size_t>& v) { return json(v); }

}  // namespace

BaselineKind parse_baseline(std::string_view name) {
  if (name == "h1" || name == "random_mean") return BaselineKind::kRandomMean;
  if (name == "h2" || name == "ensemble") return BaselineKind::kEnsemble;
  if (name == "h3" || name == "xl_context") return BaselineKind::kXlContext;
  if (name == "o1" || name == "kmeans_reps") return BaselineKind::kKMeansReps;
  if (name == "o2" || name == "dt_router") return BaselineKind::kDtRouter;
  throw ConfigError("unknown baseline method '" + std::string(name) + "'");
}

std::string_view method_id(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kRandomMean: return "h1";
    case BaselineKind::kEnsemble: return "h2";
    case BaselineKind::kXlContext: return "h3";
    case BaselineKind::kKMeansReps: return "o1";
    case BaselineKind::kDtRouter: return "o2";
  }
  return "?";
}

std::string_view method_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kRandomMean: return "random_mean";
    case BaselineKind::kEnsemble: return "ensemble";
    case BaselineKind::kXlContext: return "xl_context";
    case BaselineKind::kKMeansReps: return "kmeans_reps";
    case BaselineKind::kDtRouter: return "dt_router";
  }
  return "?";
}

BaselineSpec BaselineSpec::defaults(BaselineKind kind) {
  BaselineSpec spec;
  spec.kind = kind;
  spec.runs = kind == BaselineKind::kEnsemble ? 20 : 15;
  return spec;
}

void BaselineSpec::validate() const {
  if (runs < 1) throw ConfigError("baseline: runs must be at least 1");
  if (!(backoff > 0.0 && backoff < 1.0)) throw ConfigError("baseline: backoff must be in (0,1)");
  if (inits < 1) throw ConfigError("baseline: inits must be at least 1");
  if (min_leaf && *min_leaf < 1) throw ConfigError("baseline: min_leaf must be at least 1");
  if (max_depth < 1) throw ConfigError("baseline: max_depth must be at least 1");
  if (top_splits < 1) throw ConfigError("baseline: top_splits must be at least 1");
}

Prediction average_predictions(std::span<const Prediction> preds) {
  if (preds.empty()) throw EvaluatorError("average_predictions: nothing to average");
  Prediction avg(preds[0].rows, preds[0].classes);
  for (const auto& p : preds) {
    if (p.rows != avg.rows || p.classes != avg.classes) {
      throw EvaluatorError("average_predictions: shape mismatch");
    }
    for (std::size_t i = 0; i < p.proba.size(); ++i) avg.proba[i] += p.proba[i];
  }
  for (double& v : avg.proba) v /= static_cast<double>(preds.size());
  return avg;
}

std::vector<std::size_t> backoff_sizes(std::size_t n, double backoff) {
  std::vector<std::size_t> out;
  for (int k = 1;; ++k) {
    // The small guard keeps exact products such as 0.9 * 1000 from flooring low.
    const double raw = std::pow(backoff, k) * static_cast<double>(n);
    const auto size = static_cast<std::size_t>(std::floor(raw + 1e-9));
    if (size < 1) break;
    if (out.empty() ? size < n : size < out.back()) out.push_back(size);
  }
  return out;
}

BaselineReport random_mean(const Table& train, const Table& val, const Table& test,
                           const Evaluator& evaluator, const Budget& budget,
                           const BaselineSpec& spec) {
  check_inputs(train, val, test, budget, spec);
  const auto start = Clock::now();
  BaselineReport report;
  report.method = "h1";
  report.seed = spec.seed;
  json runs = json::array();
  double total = 0.0;
  for (std::size_t r = 0; r < spec.runs; ++r) {
    ContextSelection ctx{pick(train.rows(), budget.max_samples, Stream::derive(spec.seed, "h1-rows", r)),
                         pick(train.cols(), budget.max_features, Stream::derive(spec.seed, "h1-cols", r))};
    const double s = test_metric(train, ctx, test, evaluator, spec.metric);
    report.per_run_scores.push_back(s);
    total += s;
    runs.push_back({{"samples", indices(ctx.samples)}, {"features", indices(ctx.features)}});
  }
  report.score = total / static_cast<double>(spec.runs);
  report.context_samples = std::min(train.rows(), budget.max_samples);
  report.context_features = std::min(train.cols(), budget.max_features);
  report.details["runs"] = std::move(runs);
  report.wall_time = seconds_since(start);
  return report;
}

BaselineReport ensemble(const Table& train, const Table& val, const Table& test,
                        const Evaluator& evaluator, const Budget& budget,
                        const BaselineSpec& spec) {
  check_inputs(train, val, test, budget, spec);
  const auto start = Clock::now();
  BaselineReport report;
  report.method = "h2";
  report.seed = spec.seed;
  std::vector<Prediction> preds;
  json members = json::array();
  for (std::size_t r = 0; r < spec.runs; ++r) {
    ContextSelection ctx{pick(train.rows(), budget.max_samples, Stream::derive(spec.seed, "h2-rows", r)),
                         pick(train.cols(), budget.max_features, Stream::derive(spec.seed, "h2-cols", r))};
    Prediction pred;
    report.per_run_scores.push_back(test_metric(train, ctx, test, evaluator, spec.metric, &pred));
    preds.push_back(std::move(pred));
    members.push_back({{"member", r}, {"samples", indices(ctx.samples)}, {"features", indices(ctx.features)}});
  }
  Prediction avg = average_predictions(preds);
  report.score = compute_metric(spec.metric, avg, test.labels());
  report.proba = std::move(avg);
  report.context_samples = std::min(train.rows(), budget.max_samples);
  report.context_features = std::min(train.cols(), budget.max_features);
  report.details["members"] = std::move(members);
  report.wall_time = seconds_since(start);
  return report;
}

BaselineReport xl_context(const Table& train, const Table& val, const Table& test,
                          const Evaluator& evaluator, const Budget& budget,
                          const BaselineSpec& spec) {
  check_inputs(train, val, test, budget, spec);
  const auto start = Clock::now();
  BaselineReport report;
  report.method = "h3";
  report.seed = spec.seed;
  ContextSelection ctx{iota_indices(train.rows()),
                       pick(train.cols(), budget.max_features, Stream::derive(spec.seed, "h3-cols"))};
  const auto sizes = backoff_sizes(train.rows(), spec.backoff);
  std::size_t next = 0;
  while (true) {
    report.attempts.push_back(ctx.samples.size());
    try {
      report.score = test_metric(train, ctx, test, evaluator, spec.metric);
      break;
    } catch (const CapacityExceeded&) {
      if (next == sizes.size()) {
        throw EvaluatorError("xl_context: capacity exceeded even at a single context row");
      }
      ctx.samples = Stream::derive(spec.seed, "h3-rows", next).choose(train.rows(), sizes[next]);
      ++next;
    }
  }
  report.context_samples = ctx.samples.size();
  report.context_features = ctx.features.size();
  report.selection = std::move(ctx);
  report.details["backoff"] = spec.backoff;
  report.wall_time = seconds_since(start);
  return report;
}

BaselineReport kmeans_reps(const Table& train, const Table& val, const Table& test,
                           const Evaluator& evaluator, const Budget& budget,
                           const BaselineSpec& spec) {
  check_inputs(train, val, test, budget, spec);
  const auto start = Clock::now();
  BaselineReport report;
  report.method = "o1";
  report.seed = spec.seed;
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  ContextSelection best{iota_indices(n), iota_indices(d)};
  std::optional<double> best_val;

  if (d > budget.max_features) {
    // Columns as points.
    std::vector<double> cols(d * n);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < n; ++i) cols[j * n + i] = train.at(i, j);
    }
    const PointSet points{cols, d, n};
    // Feature candidates are compared on a fixed admissible row sample.
    const auto rows = pick(n, budget.max_samples, Stream::derive(spec.seed, "o1-eval-rows"));
    json stage = json::array();
    std::optional<double> stage_best;
    for (std::size_t i = 0; i < spec.inits; ++i) {
      Stream rng = Stream::derive(spec.seed, "o1-features", i);
      auto feats = nearest_unique(points, kmeans(points, budget.max_features, rng));
      std::sort(feats.begin(), feats.end());
      const double v = evaluator.score_subset(train, {rows, feats}, val, spec.metric);
      stage.push_back(v);
      if (!stage_best || v > *stage_best) {
        stage_best = v;
        best.features = feats;
      }
    }
    best_val = stage_best;
    report.details["feature_stage_val"] = std::move(stage);
  }

  if (n > budget.max_samples) {
    const Table reduced = train.select_cols(best.features);
    const PointSet points{reduced.values(), n, reduced.cols()};
    json stage = json::array();
    std::optional<double> stage_best;
    for (std::size_t i = 0; i < spec.inits; ++i) {
      Stream rng = Stream::derive(spec.seed, "o1-samples", i);
      auto rows = nearest_unique(points, kmeans(points, budget.max_samples, rng));
      std::sort(rows.begin(), rows.end());
      const double v = evaluator.score_subset(train, {rows, best.features}, val, spec.metric);
      stage.push_back(v);
      if (!stage_best || v > *stage_best) {
        stage_best = v;
        best.samples = rows;
      }
    }
    best_val = stage_best;
    report.details["sample_stage_val"] = std::move(stage);
  }

  report.val_score = best_val;
  report.score = test_metric(train, best, test, evaluator, spec.metric);
  report.context_samples = best.samples.size();
  report.context_features = best.features.size();
  report.selection = std::move(best);
  report.details["inits"] = spec.inits;
  report.wall_time = seconds_since(start);
  return report;
}

Prediction routed_predict(const Table& train, const Table& query, const Evaluator& evaluator,
                          std::span<const std::size_t> features, std::size_t min_leaf,
                          std::size_t max_rows, std::vector<std::size_t>* leaf_sizes) {
  TreeOptions options;
  options.min_leaf = min_leaf;
  options.criterion = TreeOptions::Criterion::kGini;
  const DecisionTree tree(train, features, options);
  std::map<std::size_t, std::vector<std::size_t>> routed;
  for (std::size_t q = 0; q < query.rows(); ++q) routed[tree.route(query.row(q))].push_back(q);
  Prediction out(query.rows(), train.class_count());
  for (const auto& [leaf, qrows] : routed) {
    const auto& rows = tree.nodes()[leaf].rows;
    ContextSelection ctx;
    ctx.samples.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), max_rows)));
    ctx.features.assign(features.begin(), features.end());
    if (leaf_sizes) leaf_sizes->push_back(ctx.samples.size());
    const Prediction part = evaluator.score_context(train, ctx, query.select_rows(qrows));
    for (std::size_t i = 0; i < qrows.size(); ++i) {
      std::copy(part.row(i).begin(), part.row(i).end(), out.row(qrows[i]).begin());
    }
  }
  return out;
}

BaselineReport dt_router(const Table& train, const Table& val, const Table& test,
                         const Evaluator& evaluator, const Budget& budget,
                         const BaselineSpec& spec) {
  check_inputs(train, val, test, budget, spec);
  const auto start = Clock::now();
  BaselineReport report;
  report.method = "o2";
  report.seed = spec.seed;
  const std::size_t d = train.cols();
  const std::size_t min_leaf = spec.min_leaf.value_or(budget.max_samples);
  const bool random_features = d > budget.max_features;
  const std::size_t reps = random_features ? spec.inits : 1;

  std::vector<std::size_t> best_features;
  std::optional<double> best_val;
  json stage = json::array();
  for (std::size_t i = 0; i < reps; ++i) {
    std::vector<std::size_t> feats;
    if (!random_features) {
      feats = iota_indices(d);
    } else if (spec.router_features == RouterFeatures::kTree) {
      TreeOptions options;
      options.max_depth = spec.max_depth;
      options.criterion = TreeOptions::Criterion::kEntropy;
      options.top_splits = spec.top_splits;
      Stream rng = Stream::derive(spec.seed, "o2-tree", i);
      const auto all = iota_indices(d);
      feats = DecisionTree(train, all, options, &rng).split_features(budget.max_features);
      if (feats.empty()) feats = Stream::derive(spec.seed, "o2-cols", i).choose(d, budget.max_features);
      std::sort(feats.begin(), feats.end());
    } else {
      feats = Stream::derive(spec.seed, "o2-cols", i).choose(d, budget.max_features);
    }
    const Prediction pred = routed_predict(train, val, evaluator, feats, min_leaf, budget.max_samples);
    const double v = compute_metric(spec.metric, pred, val.labels());
    stage.push_back(v);
    if (!best_val || v > *best_val) {
      best_val = v;
      best_features = feats;
    }
  }
  std::vector<std::size_t> leaf_sizes;
  const Prediction pred =
      routed_predict(train, test, evaluator, best_features, min_leaf, budget.max_samples, &leaf_sizes);
  report.score = compute_metric(spec.metric, pred, test.labels());
  report.val_score = best_val;
  report.context_samples = leaf_sizes.empty() ? 0 : *std::max_element(leaf_sizes.begin(), leaf_sizes.end());
  report.context_features = best_features.size();
  report.details["repetition_val"] = std::move(stage);
  report.details["leaf_context_sizes"] = leaf_sizes;
  report.details["features"] = best_features;
  report.details["feature_mode"] =
      !random_features ? "all" : (spec.router_features == RouterFeatures::kTree ? "tree" : "random");
  report.details["min_leaf"] = min_leaf;
  report.wall_time = seconds_since(start);
  return report;
}

BaselineReport run_baseline(const Table& train, const Table& val, const Table& test,
                            const Evaluator& evaluator, const Budget& budget,
                            const BaselineSpec& spec) {
  switch (spec.kind) {
    case BaselineKind::kRandomMean: return random_mean(train, val, test, evaluator, budget, spec);
    case BaselineKind::kEnsemble: return ensemble(train, val, test, evaluator, budget, spec);
    case BaselineKind::kXlContext: return xl_context(train, val, test, evaluator, budget, spec);
    case BaselineKind::kKMeansReps: return kmeans_reps(train, val, test, evaluator, budget, spec);
    case BaselineKind::kDtRouter: return dt_router(train, val, test, evaluator, budget, spec);
  }
  throw ConfigError("baseline: unknown kind");
}

json report_row(const BaselineReport& report, std::string_view dataset, std::string_view setting) {
  json row = {{"dataset", dataset},
              {"method", report.method},
              {"setting", setting},
              {"score", report.score},
              {"context_size", {{"samples", report.context_samples}, {"features", report.context_features}}},
              {"wall_time", report.wall_time},
              {"seed", report.seed}};
  if (!report.per_run_scores.empty()) row["per_run_scores"] = report.per_run_scores;
  if (report.val_score) row["val_score"] = *report.val_score;
  if (!report.attempts.empty()) row["attempts"] = report.attempts;
  if (!report.details.empty()) row["details"] = report.details;
  return row;
}

}  // namespace vipcop
