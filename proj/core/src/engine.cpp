#include "vipcop/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "vipcop/error.hpp"

namespace vipcop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn(i) for i in [0, count) on up to `threads` threads. The first
// exception (lowest index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&](std::size_t t) {
    for (std::size_t i = t; i < count; i += threads) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Indices of [begin, end) ordered by value descending, ties by index.
std::vector<std::size_t> ranked(std::span<const double> phi, std::size_t begin,
                                std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return phi[a] > phi[b]; });
  return idx;
}

std::vector<std::size_t> top_positive_or_fallback(std::span<const double> phi,
                                                  std::size_t begin, std::size_t end,
                                                  std::size_t cap) {
  const auto order = ranked(phi, begin, end);
  std::vector<std::size_t> out;
  for (std::size_t i : order) {
    if (out.size() == cap || !(phi[i] > 0.0)) break;
    out.push_back(i - begin);
  }
  if (out.empty()) {
    for (std::size_t k = 0; k < cap && k < order.size(); ++k) out.push_back(order[k] - begin);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ItemUniverse::ItemUniverse(std::size_t n, std::size_t d, const Budget& budget)
    : n_(n), d_(d) {
  budget.validate();
  optimize_samples_ = n > budget.max_samples;
  optimize_features_ = d > budget.max_features;
  size_ = (optimize_samples_ ? n : 0) + (optimize_features_ ? d : 0);
  sample_draw_ = std::min(budget.max_samples, n);
  feature_draw_ = std::min(budget.max_features, d);
  if (size_ == 0) {
    throw ConfigError("nothing to optimize: the table (" + std::to_string(n) + " x " +
                      std::to_string(d) + ") fits the context budget");
  }
}

std::size_t ItemUniverse::subset_size() const {
  return (optimize_samples_ ? sample_draw_ : 0) + (optimize_features_ ? feature_draw_ : 0);
}

ItemUniverse::Item ItemUniverse::item(std::size_t index) const {
  if (index >= size_) throw ConfigError("item index out of range");
  if (optimize_samples_ && index < n_) return {ItemKind::kSample, index};
  return {ItemKind::kFeature, index - feature_offset()};
}

std::size_t ItemUniverse::index_of(ItemKind kind, std::size_t local) const {
  if (kind == ItemKind::kSample) {
    if (!optimize_samples_ || local >= n_) throw ConfigError("sample item not in universe");
    return local;
  }
  if (!optimize_features_ || local >= d_) throw ConfigError("feature item not in universe");
  return feature_offset() + local;
}

std::vector<std::uint8_t> SubsetObservation::membership(std::size_t universe_size) const {
  std::vector<std::uint8_t> c(universe_size, 0);
  for (auto i : members) c.at(i) = 1;
  return c;
}

void EngineConfig::validate() const {
  if (rounds < 1) throw ConfigError("engine: rounds must be at least 1");
  if (!(eta > 1.0)) throw ConfigError("engine: eta must be greater than 1");
  if (batch < 1) throw ConfigError("engine: batch must be at least 1");
  if (learning_rate && !(*learning_rate > 0.0)) {
    throw ConfigError("engine: learning rate must be positive");
  }
  if (parallel_eval < 1 || parallel_runs < 1) {
    throw ConfigError("engine: parallelism must be at least 1");
  }
}

double EngineConfig::resolved_learning_rate(const ItemUniverse& universe) const {
  if (learning_rate) return *learning_rate;
  return 0.5 / static_cast<double>(universe.subset_size());
}

std::size_t schedule_depth(std::size_t rounds, double eta) {
  if (rounds < 1 || !(eta > 1.0)) throw ConfigError("schedule: need rounds >= 1 and eta > 1");
  std::size_t depth = 0;
  double power = eta;
  while (power <= static_cast<double>(rounds)) {
    ++depth;
    power *= eta;
  }
  return depth;
}

std::vector<double> temperature_schedule(std::size_t rounds, double eta) {
  const auto r_max = static_cast<long>(schedule_depth(rounds, eta));
  std::vector<double> taus;
  for (long k = r_max; k >= 0; --k) {
    taus.push_back(std::pow(eta, static_cast<double>(2 * k - r_max)));
  }
  return taus;
}

std::vector<double> sampling_distribution(std::span<const double> phi, double tau) {
  if (!(tau > 0.0)) throw ConfigError("sampling_distribution: tau must be positive");
  std::vector<double> p(phi.size());
  if (phi.empty()) return p;
  const double top = *std::max_element(phi.begin(), phi.end());
  double total = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    p[i] = std::exp((phi[i] - top) / tau);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> inclusion_probabilities(std::span<const double> logits, std::size_t k) {
  const std::size_t n = logits.size();
  if (k > n) throw ConfigError("inclusion_probabilities: k exceeds the item count");
  std::vector<double> incl(n, 0.0);
  if (k == 0) return incl;
  if (k == n) {
    std::fill(incl.begin(), incl.end(), 1.0);
    return incl;
  }
  const auto order = ranked(logits, 0, n);
  // suffix_lse[c] = log sum_{t >= c} exp(logits[order[t]]).
  std::vector<double> suffix_lse(n + 1, -std::numeric_limits<double>::infinity());
  for (std::size_t t = n; t-- > 0;) {
    const double a = suffix_lse[t + 1];
    const double b = logits[order[t]];
    const double hi = std::max(a, b);
    suffix_lse[t] = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
  }
  // Smallest number c of certain items for which the largest free share fits.
  std::size_t c = 0;
  while (c < k && std::log(static_cast<double>(k - c)) + logits[order[c]] - suffix_lse[c] > 0.0) {
    ++c;
  }
  for (std::size_t t = 0; t < c; ++t) incl[order[t]] = 1.0;
  const double log_free = std::log(static_cast<double>(k - c));
  for (std::size_t t = c; t < n; ++t) {
    incl[order[t]] = std::min(1.0, std::exp(log_free + logits[order[t]] - suffix_lse[c]));
  }
  return incl;
}

std::vector<std::size_t> systematic_sample(std::span<const double> incl, std::size_t k,
                                           Stream& rng) {
  const std::size_t n = incl.size();
  if (k > n) throw ConfigError("systematic_sample: k exceeds the item count");
  std::vector<std::size_t> out;
  if (k == 0) return out;
  if (k == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm.begin(), perm.end());
  double total = 0.0;
  for (double v : incl) total += v;
  const double scale = total / static_cast<double>(k);
  const double u = rng.uniform();
  std::vector<std::uint8_t> taken(n, 0);
  out.reserve(k);
  std::size_t pos = 0;
  double cum = incl[perm[0]];
  for (std::size_t j = 0; j < k; ++j) {
    const double point = (u + static_cast<double>(j)) * scale;
    while (pos + 1 < n && cum <= point) cum += incl[perm[++pos]];
    // Rounding can land two points in one unit-length interval; move on to
    // the next untaken item with positive probability.
    std::size_t p = pos;
    while (p < n && (taken[perm[p]] || incl[perm[p]] <= 0.0)) ++p;
    if (p == n) break;
    if (p != pos) {
      for (std::size_t t = pos + 1; t <= p; ++t) cum += incl[perm[t]];
      pos = p;
    }
    taken[perm[p]] = 1;
    out.push_back(perm[p]);
  }
  // Still short (pathological rounding): fill by descending probability.
  if (out.size() < k) {
    const auto order = ranked(incl, 0, n);
    for (std::size_t i : order) {
      if (out.size() == k) break;
      if (!taken[i]) {
        taken[i] = 1;
        out.push_back(i);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> subset_inclusion(std::span<const double> logits,
                                     const ItemUniverse& universe) {
  if (logits.size() != universe.size()) throw ConfigError("draw: weight vector size mismatch");
  std::vector<double> incl(universe.size(), 0.0);
  if (universe.optimize_samples()) {
    auto part = inclusion_probabilities(logits.subspan(0, universe.n()), universe.sample_draw());
    std::copy(part.begin(), part.end(), incl.begin());
  }
  if (universe.optimize_features()) {
    const std::size_t off = universe.feature_offset();
    auto part =
        inclusion_probabilities(logits.subspan(off, universe.d()), universe.feature_draw());
    std::copy(part.begin(), part.end(), incl.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return incl;
}

ContextSelection draw_with_inclusion(std::span<const double> inclusion,
                                     const ItemUniverse& universe, Stream& rng) {
  ContextSelection ctx;
  if (universe.optimize_samples()) {
    ctx.samples = systematic_sample(inclusion.subspan(0, universe.n()), universe.sample_draw(), rng);
  } else {
    ctx.samples = iota_indices(universe.n());
  }
  if (universe.optimize_features()) {
    ctx.features = systematic_sample(inclusion.subspan(universe.feature_offset(), universe.d()),
                                     universe.feature_draw(), rng);
  } else {
    ctx.features = iota_indices(universe.d());
  }
  return ctx;
}

ContextSelection draw_subset_logits(std::span<const double> logits,
                                    const ItemUniverse& universe, Stream& rng) {
  const auto incl = subset_inclusion(logits, universe);
  return draw_with_inclusion(incl, universe, rng);
}

ContextSelection draw_subset(std::span<const double> probs, const ItemUniverse& universe,
                             Stream& rng) {
  std::vector<double> logits(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0)) throw ConfigError("draw_subset: negative probability");
    logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::max();
  }
  return draw_subset_logits(logits, universe, rng);
}

std::vector<std::uint32_t> context_members(const ContextSelection& ctx,
                                           const ItemUniverse& universe) {
  std::vector<std::uint32_t> members;
  members.reserve(universe.subset_size());
  if (universe.optimize_samples()) {
    for (std::size_t i : ctx.samples) members.push_back(static_cast<std::uint32_t>(i));
  }
  if (universe.optimize_features()) {
    const std::size_t off = universe.feature_offset();
    for (std::size_t j : ctx.features) members.push_back(static_cast<std::uint32_t>(off + j));
  }
  std::sort(members.begin(), members.end());
  return members;
}

namespace {

double residual(std::span<const double> phi, const SubsetObservation& obs, double phi0) {
  double fit = phi0;
  for (auto i : obs.members) fit += phi[i];
  return fit - obs.performance;
}

}  // namespace

double batch_loss(std::span<const double> phi, std::span<const SubsetObservation> batch,
                  std::optional<double> intercept) {
  if (batch.empty()) throw ConfigError("batch_loss: empty batch");
  double sum = 0.0;
  for (const auto& obs : batch) {
    const double r = residual(phi, obs, intercept.value_or(0.0));
    sum += r * r;
  }
  return sum / static_cast<double>(batch.size());
}

Gradient batch_gradient(std::span<const double> phi, std::span<const SubsetObservation> batch,
                        std::optional<double> intercept) {
  if (batch.empty()) throw ConfigError("batch_gradient: empty batch");
  Gradient g;
  g.phi.assign(phi.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& obs : batch) {
    const double coeff = 2.0 * residual(phi, obs, intercept.value_or(0.0)) * inv_b;
    for (auto i : obs.members) {
      if (i >= phi.size()) throw ConfigError("batch_gradient: membership exceeds universe");
      g.phi[i] += coeff;
    }
    g.intercept += coeff;
  }
  return g;
}

SgdResult sgd_step(std::span<const double> phi, std::span<const SubsetObservation> batch,
                   double learning_rate, std::optional<double> intercept) {
  const Gradient g = batch_gradient(phi, batch, intercept);
  SgdResult out;
  out.phi.assign(phi.begin(), phi.end());
  for (std::size_t i = 0; i < out.phi.size(); ++i) out.phi[i] -= learning_rate * g.phi[i];
  if (intercept) out.intercept = *intercept - learning_rate * g.intercept;
  return out;
}

ContextSelection select_context(std::span<const double> phi, const ItemUniverse& universe) {
  if (phi.size() != universe.size()) throw ConfigError("select_context: value vector size");
  ContextSelection ctx;
  if (universe.optimize_samples()) {
    ctx.samples = top_positive_or_fallback(phi, 0, universe.n(), universe.sample_draw());
  } else {
    ctx.samples = iota_indices(universe.n());
  }
  if (universe.optimize_features()) {
    const std::size_t off = universe.feature_offset();
    ctx.features = top_positive_or_fallback(phi, off, off + universe.d(), universe.feature_draw());
  } else {
    ctx.features = iota_indices(universe.d());
  }
  return ctx;
}

double estimated_value(std::span<const double> phi, std::optional<double> intercept,
                       const ItemUniverse& universe, const ContextSelection& ctx) {
  double v = intercept.value_or(0.0);
  for (auto i : context_members(ctx, universe)) v += phi[i];
  return v;
}

ContextSelection class_coverage_fixup(const ContextSelection& selection, const Table& train,
                                      std::span<const double> phi,
                                      const ItemUniverse& universe) {
  if (!universe.optimize_samples()) return selection;
  ContextSelection out = selection;
  const std::uint32_t k = train.class_count();
  std::vector<std::size_t> covered(k, 0);
  std::vector<std::uint8_t> chosen(train.rows(), 0);
  for (std::size_t i : out.samples) {
    ++covered[train.label(i)];
    chosen[i] = 1;
  }
  // Best-valued unselected representative of each missing class.
  std::vector<std::size_t> best(k, train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    const Label y = train.label(i);
    if (covered[y] > 0 || chosen[i]) continue;
    if (best[y] == train.rows() || phi[i] > phi[best[y]]) best[y] = i;
  }
  std::vector<Label> missing;
  for (Label c = 0; c < k; ++c) {
    if (covered[c] == 0 && best[c] < train.rows()) missing.push_back(c);
  }
  std::stable_sort(missing.begin(), missing.end(),
                   [&](Label a, Label b) { return phi[best[a]] > phi[best[b]]; });
  for (Label c : missing) {
    // Lowest-valued selected sample whose class keeps another representative.
    std::size_t victim_pos = out.samples.size();
    for (std::size_t p = 0; p < out.samples.size(); ++p) {
      const std::size_t s = out.samples[p];
      if (covered[train.label(s)] < 2) continue;
      if (victim_pos == out.samples.size() || phi[s] < phi[out.samples[victim_pos]] ||
          (phi[s] == phi[out.samples[victim_pos]] && s > out.samples[victim_pos])) {
        victim_pos = p;
      }
    }
    if (victim_pos == out.samples.size()) break;
    --covered[train.label(out.samples[victim_pos])];
    out.samples[victim_pos] = best[c];
    ++covered[c];
  }
  std::sort(out.samples.begin(), out.samples.end());
  return out;
}

RunResult run_single(const Table& train, const Table& val, const Evaluator& evaluator,
                     const Budget& budget, const EngineConfig& config, double tau,
                     std::size_t run_id) {
  config.validate();
  if (!(tau > 0.0)) throw ConfigError("run_single: tau must be positive");
  if (val.cols() != train.cols()) throw ConfigError("run_single: val/train feature mismatch");
  const ItemUniverse universe(train.rows(), train.cols(), budget);
  const std::size_t s = universe.size();
  const double lr = config.resolved_learning_rate(universe);

  RunResult result;
  result.run_id = run_id;
  result.tau = tau;
  ValueVector phi;
  if (config.initial_phi) {
    if (config.initial_phi->size() != s) throw ConfigError("initial_phi has the wrong length");
    phi = *config.initial_phi;
  } else {
    phi.assign(s, 1.0 / static_cast<double>(s));
  }
  std::optional<double> intercept;
  if (config.intercept) intercept = 0.0;

  const std::size_t patience = (config.rounds + 3) / 4;
  std::size_t since_improvement = 0;
  double best_so_far = -std::numeric_limits<double>::infinity();
  std::vector<double> logits(s);
  std::vector<SubsetObservation> batch(config.batch);
  std::vector<ContextSelection> contexts(config.batch);

  for (std::size_t round = 0; round < config.rounds; ++round) {
    const auto round_start = Clock::now();
    for (std::size_t i = 0; i < s; ++i) logits[i] = phi[i] / tau;
    const auto incl = subset_inclusion(logits, universe);
    for (std::size_t b = 0; b < config.batch; ++b) {
      Stream rng = Stream::derive(config.seed, "draw", run_id, round, b);
      contexts[b] = draw_with_inclusion(incl, universe, rng);
      batch[b].members = context_members(contexts[b], universe);
      batch[b].run_id = run_id;
      batch[b].round = round;
      batch[b].slot = b;
    }
    const auto eval_start = Clock::now();
    try {
      parallel_for(config.batch, config.parallel_eval, [&](std::size_t b) {
        batch[b].performance = evaluator.score_subset(
            train, contexts[b], val, config.metric,
            derive_key(config.seed, "score", run_id, round, b));
      });
    } catch (const std::exception& e) {
      result.error = e.what();
      result.evaluator_calls += config.batch;
      break;
    }
    const double eval_seconds = seconds_since(eval_start);
    result.evaluator_calls += config.batch;

    auto step = sgd_step(phi, batch, lr, intercept);
    phi = std::move(step.phi);
    intercept = step.intercept;

    const double current = estimated_value(phi, intercept, universe, select_context(phi, universe));
    if (current > best_so_far) {
      best_so_far = current;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    result.round_estimate.push_back(current);
    result.trajectory.push_back(best_so_far);
    const double total = seconds_since(round_start);
    result.round_seconds.push_back(total);
    result.engine_seconds.push_back(total - eval_seconds);
    ++result.rounds_completed;
    if (config.early_stop && since_improvement >= patience) {
      result.stopped_early = true;
      break;
    }
  }

  ContextSelection selected = select_context(phi, universe);
  if (config.class_coverage_fixup) {
    selected = class_coverage_fixup(selected, train, phi, universe);
  }
  result.estimated_val = estimated_value(phi, intercept, universe, selected);
  result.selected = std::move(selected);
  result.phi_final = std::move(phi);
  result.intercept = intercept;
  return result;
}

OptimizeResult optimize(const Table& train, const Table& val, const Evaluator& evaluator,
                        const Budget& budget, const EngineConfig& config) {
  config.validate();
  const ItemUniverse universe(train.rows(), train.cols(), budget);
  OptimizeResult out;
  out.schedule = temperature_schedule(config.rounds, config.eta);
  out.runs.resize(out.schedule.size());
  parallel_for(out.schedule.size(), config.parallel_runs, [&](std::size_t k) {
    out.runs[k] = run_single(train, val, evaluator, budget, config, out.schedule[k], k);
  });
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < out.runs.size(); ++k) {
    if (!out.runs[k].ok()) continue;
    if (!best || out.runs[k].estimated_val > out.runs[*best].estimated_val) best = k;
  }
  if (!best) {
    throw EvaluatorError("optimize: all runs failed; first error: " + *out.runs.front().error);
  }
  out.best_run = *best;
  out.selection = out.runs[*best].selected;
  return out;
}

}  // namespace vipcop
