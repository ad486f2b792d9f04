#include "vipcop/cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

#include "vipcop/bridge.hpp"
#include "vipcop/cli/toml.hpp"
#include "vipcop/error.hpp"

namespace vipcop::cli {

using nlohmann::json;

namespace {

// Typed access to one config table that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("'" + prefix_ + "' must be a table");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = raw(key)) out = convert<T>(*v, key);
  }
  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (const json* v = raw(key)) out = convert<T>(*v, key);
  }
  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + field(key) + "'");
    }
  }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw std::runtime_error("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::runtime_error("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::runtime_error("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::runtime_error("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + field(key) + "' has the wrong type");
    }
  }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::string label_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return std::to_string(v.get<std::int64_t>());
  throw ConfigError("config key 'dataset.label' must be a column name or index");
}

}  // namespace

Setting parse_setting(std::string_view name) {
  if (name == "original") return Setting::kOriginal;
  if (name == "da_sample") return Setting::kDaSample;
  if (name == "da_feature") return Setting::kDaFeature;
  if (name == "dn_s1") return Setting::kDnS1;
  if (name == "dn_s2") return Setting::kDnS2;
  if (name == "dn_f") return Setting::kDnF;
  throw ConfigError("setting: unknown value '" + std::string(name) +
                    "' (original, da_sample, da_feature, dn_s1, dn_s2, dn_f)");
}

std::string_view to_string(Setting setting) {
  switch (setting) {
    case Setting::kOriginal: return "original";
    case Setting::kDaSample: return "da_sample";
    case Setting::kDaFeature: return "da_feature";
    case Setting::kDnS1: return "dn_s1";
    case Setting::kDnS2: return "dn_s2";
    case Setting::kDnF: return "dn_f";
  }
  return "?";
}

void ExperimentConfig::apply_seed(std::uint64_t value) {
  seed = value;
  split.seed = value;
  if (augment) augment->seed = value;
  if (noise) noise->seed = value;
  engine.seed = value;
  baseline.seed = value;
}

BaselineSpec ExperimentConfig::baseline_spec(BaselineKind kind) const {
  BaselineSpec spec = baseline;
  spec.kind = kind;
  spec.runs = kind == BaselineKind::kEnsemble ? ensemble_runs : random_runs;
  return spec;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw ConfigError("dataset.path: required");
  split.validate();
  budget.validate();
  engine.validate();
  baseline.validate();
  if (random_runs < 1) throw ConfigError("baseline.random_runs: must be at least 1");
  if (ensemble_runs < 1) throw ConfigError("baseline.ensemble_runs: must be at least 1");
  const bool da = setting == Setting::kDaSample || setting == Setting::kDaFeature;
  const bool dn = setting == Setting::kDnS1 || setting == Setting::kDnS2 || setting == Setting::kDnF;
  if (da && !augment) {
    throw ConfigError("augment: setting '" + std::string(to_string(setting)) + "' requires an [augment] table");
  }
  if (!da && augment) {
    throw ConfigError("augment: given but setting '" + std::string(to_string(setting)) + "' does not augment");
  }
  if (dn && !noise) {
    throw ConfigError("noise: setting '" + std::string(to_string(setting)) + "' requires a [noise] table");
  }
  if (!dn && noise) {
    throw ConfigError("noise: given but setting '" + std::string(to_string(setting)) + "' does not inject noise");
  }
  if (setting == Setting::kDaSample && (augment->kind != AugmentKind::kSampleAffine || augment->target_n == 0)) {
    throw ConfigError("augment.target_n: required for setting 'da_sample'");
  }
  if (setting == Setting::kDaFeature &&
      (augment->kind != AugmentKind::kFeatureProjection || augment->target_d == 0)) {
    throw ConfigError("augment.target_d: required for setting 'da_feature'");
  }
  if (noise) {
    noise->validate();
    const bool ok = (setting == Setting::kDnS1 && noise->kind == NoiseKind::kS1Marginal) ||
                    (setting == Setting::kDnS2 && noise->kind == NoiseKind::kS2Gaussian) ||
                    (setting == Setting::kDnF && !is_sample_noise(noise->kind));
    if (!ok) {
      throw ConfigError("noise.kind: '" + std::string(to_string(noise->kind)) +
                        "' does not match setting '" + std::string(to_string(setting)) + "'");
    }
  }
  if (evaluator.kind == EvaluatorKind::kBridge && evaluator.bridge_cmd.empty()) {
    throw ConfigError("evaluator.bridge_cmd: required for the bridge evaluator");
  }
  if (evaluator.k < 1) throw ConfigError("evaluator.k: must be at least 1");
  if (!(evaluator.timeout > 0)) throw ConfigError("evaluator.timeout: must be positive");
  if (evaluator.connections < 1) throw ConfigError("evaluator.connections: must be at least 1");
  if (evaluator.noise_sd < 0) throw ConfigError("evaluator.noise_sd: must be non-negative");
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  Section root(j, "");

  std::optional<std::string> setting;
  root.get("setting", setting);
  if (setting) c.setting = parse_setting(*setting);
  std::optional<std::uint64_t> seed;
  root.get("seed", seed);
  std::optional<std::string> out;
  root.get("out", out);
  if (out) c.out = *out;
  if (const json* methods = root.raw("baselines")) {
    if (!methods->is_array()) throw ConfigError("config key 'baselines' must be an array");
    c.baselines.clear();
    for (const auto& m : *methods) {
      if (!m.is_string()) throw ConfigError("config key 'baselines' must list method names");
      c.baselines.push_back(parse_baseline(m.get<std::string>()));
    }
  }

  {
    Section ds = root.sub("dataset");
    std::string path;
    ds.get("path", path);
    if (!path.empty()) {
      c.dataset = path;
      if (c.dataset.is_relative() && !base_dir.empty()) c.dataset = base_dir / c.dataset;
    }
    if (const json* label = ds.raw("label")) c.label = parse_label_column(label_text(*label));
    ds.get("name", c.name);
    ds.finish();
  }
  {
    Section sp = root.sub("split");
    sp.get("train", c.split.train_fraction);
    sp.get("val", c.split.val_fraction);
    sp.get("test", c.split.test_fraction);
    sp.get("stratified", c.split.stratified);
    sp.finish();
  }
  if (root.has("augment")) {
    Section au = root.sub("augment");
    AugmentSpec spec;
    std::size_t target_n = 0;
    std::size_t target_d = 0;
    au.get("target_n", target_n);
    au.get("target_d", target_d);
    if (target_n > 0 && target_d > 0) {
      throw ConfigError("augment: give target_n or target_d, not both");
    }
    spec.kind = target_d > 0 ? AugmentKind::kFeatureProjection : AugmentKind::kSampleAffine;
    spec.target_n = target_n;
    spec.target_d = target_d;
    au.finish();
    c.augment = spec;
  }
  if (root.has("noise")) {
    Section no = root.sub("noise");
    NoiseSpec spec;
    std::optional<std::string> kind;
    no.get("kind", kind);
    if (kind) {
      try {
        spec.kind = parse_noise_kind(*kind);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("noise.kind: ") + e.what());
      }
    } else if (c.setting == Setting::kDnS2) {
      spec.kind = NoiseKind::kS2Gaussian;
    } else if (c.setting == Setting::kDnF) {
      spec.kind = NoiseKind::kFMixed;
    }
    no.get("drop_fraction", spec.drop_fraction);
    no.finish();
    c.noise = spec;
  }
  {
    Section bu = root.sub("budget");
    bu.get("samples", c.budget.max_samples);
    bu.get("features", c.budget.max_features);
    bu.finish();
  }
  {
    Section en = root.sub("engine");
    en.get("rounds", c.engine.rounds);
    en.get("eta", c.engine.eta);
    en.get("batch", c.engine.batch);
    if (const json* lr = en.raw("learning_rate")) {
      if (lr->is_string() && lr->get<std::string>() == "auto") {
        c.engine.learning_rate.reset();
      } else if (lr->is_number()) {
        c.engine.learning_rate = lr->get<double>();
      } else {
        throw ConfigError("config key 'engine.learning_rate' must be a number or \"auto\"");
      }
    }
    std::optional<std::string> metric;
    en.get("metric", metric);
    if (metric) c.engine.metric = parse_metric(*metric);
    en.get("intercept", c.engine.intercept);
    en.get("class_coverage_fixup", c.engine.class_coverage_fixup);
    en.get("parallel_eval", c.engine.parallel_eval);
    en.get("parallel_runs", c.engine.parallel_runs);
    en.get("early_stop", c.engine.early_stop);
    en.finish();
  }
  {
    Section ev = root.sub("evaluator");
    std::optional<std::string> kind;
    ev.get("kind", kind);
    if (kind) {
      if (*kind == "knn") c.evaluator.kind = EvaluatorKind::kKnn;
      else if (*kind == "oracle") c.evaluator.kind = EvaluatorKind::kOracle;
      else if (*kind == "bridge") c.evaluator.kind = EvaluatorKind::kBridge;
      else throw ConfigError("evaluator.kind: unknown value '" + *kind + "' (knn, oracle, bridge)");
    }
    ev.get("k", c.evaluator.k);
    std::optional<std::size_t> cap_samples;
    std::optional<std::size_t> cap_features;
    ev.get("capacity_samples", cap_samples);
    ev.get("capacity_features", cap_features);
    if (cap_samples || cap_features) {
      c.evaluator.capacity = Budget{cap_samples.value_or(static_cast<std::size_t>(-1)),
                                    cap_features.value_or(static_cast<std::size_t>(-1))};
    }
    ev.get("bridge_cmd", c.evaluator.bridge_cmd);
    ev.get("timeout", c.evaluator.timeout);
    ev.get("connections", c.evaluator.connections);
    ev.get("sample_weights", c.evaluator.sample_weights);
    ev.get("feature_weights", c.evaluator.feature_weights);
    ev.get("base", c.evaluator.base);
    ev.get("noise_sd", c.evaluator.noise_sd);
    ev.finish();
  }
  {
    Section ba = root.sub("baseline");
    ba.get("random_runs", c.random_runs);
    ba.get("ensemble_runs", c.ensemble_runs);
    ba.get("backoff", c.baseline.backoff);
    ba.get("inits", c.baseline.inits);
    ba.get("min_leaf", c.baseline.min_leaf);
    ba.get("max_depth", c.baseline.max_depth);
    ba.get("top_splits", c.baseline.top_splits);
    std::optional<std::string> router;
    ba.get("router_features", router);
    if (router) {
      if (*router == "random") c.baseline.router_features = RouterFeatures::kRandom;
      else if (*router == "tree") c.baseline.router_features = RouterFeatures::kTree;
      else throw ConfigError("baseline.router_features: unknown value '" + *router + "' (random, tree)");
    }
    ba.finish();
  }
  root.finish();
  c.baseline.metric = Metric::kBalancedAccuracy;
  c.apply_seed(seed.value_or(42));
  return c;
}

json read_config_file(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return load_toml(path);
}

ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& file,
                                const Overrides& o) {
  ExperimentConfig c;
  if (file) {
    c = config_from_json(read_config_file(*file), file->parent_path());
  } else {
    c.apply_seed(42);
  }
  if (const char* env = std::getenv("VIPCOP_SEED"); env && *env) {
    std::uint64_t value = 0;
    const std::string text(env);
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw ConfigError("VIPCOP_SEED: not a non-negative integer: '" + text + "'");
    }
    c.apply_seed(value);
  }
  if (o.dataset) c.dataset = *o.dataset;
  if (o.label) c.label = parse_label_column(*o.label);
  if (o.setting) {
    c.setting = parse_setting(*o.setting);
    if (c.noise && c.setting == Setting::kDnS2 && c.noise->kind == NoiseKind::kS1Marginal) {
      c.noise->kind = NoiseKind::kS2Gaussian;
    }
  }
  if (o.budget_samples) c.budget.max_samples = *o.budget_samples;
  if (o.budget_features) c.budget.max_features = *o.budget_features;
  if (o.rounds) c.engine.rounds = *o.rounds;
  if (o.eta) c.engine.eta = *o.eta;
  if (o.batch) c.engine.batch = *o.batch;
  if (o.lr) c.engine.learning_rate = *o.lr;
  if (o.metric) c.engine.metric = parse_metric(*o.metric);
  if (o.evaluator) {
    if (*o.evaluator == "knn") c.evaluator.kind = EvaluatorKind::kKnn;
    else if (*o.evaluator == "oracle") c.evaluator.kind = EvaluatorKind::kOracle;
    else if (*o.evaluator == "bridge") c.evaluator.kind = EvaluatorKind::kBridge;
    else throw ConfigError("--evaluator: unknown value '" + *o.evaluator + "' (knn, oracle, bridge)");
  }
  if (o.bridge_cmd) c.evaluator.bridge_cmd = *o.bridge_cmd;
  if (o.seed) c.apply_seed(*o.seed);
  if (o.out) c.out = *o.out;
  c.validate();
  return c;
}

json config_echo(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"path", c.dataset.string()}, {"name", c.name}};
  j["setting"] = to_string(c.setting);
  j["split"] = {{"train", c.split.train_fraction}, {"val", c.split.val_fraction},
                {"test", c.split.test_fraction}, {"stratified", c.split.stratified}};
  if (c.augment) j["augment"] = {{"target_n", c.augment->target_n}, {"target_d", c.augment->target_d}};
  if (c.noise) j["noise"] = {{"kind", to_string(c.noise->kind)}, {"drop_fraction", c.noise->drop_fraction}};
  j["budget"] = {{"samples", c.budget.max_samples}, {"features", c.budget.max_features}};
  const char* kinds[] = {"knn", "oracle", "bridge"};
  j["evaluator"] = {{"kind", kinds[static_cast<int>(c.evaluator.kind)]}, {"k", c.evaluator.k}};
  if (c.evaluator.kind == EvaluatorKind::kBridge) j["evaluator"]["bridge_cmd"] = c.evaluator.bridge_cmd;
  j["baseline"] = {{"random_runs", c.random_runs}, {"ensemble_runs", c.ensemble_runs},
                   {"backoff", c.baseline.backoff}, {"inits", c.baseline.inits},
                   {"max_depth", c.baseline.max_depth}, {"top_splits", c.baseline.top_splits},
                   {"router_features", c.baseline.router_features == RouterFeatures::kTree ? "tree" : "random"}};
  j["seed"] = c.seed;
  return j;
}

std::unique_ptr<Evaluator> make_evaluator(const EvaluatorConfig& config, const Budget&) {
  switch (config.kind) {
    case EvaluatorKind::kKnn:
      return std::make_unique<KnnEvaluator>(config.k, config.capacity);
    case EvaluatorKind::kOracle:
      return std::make_unique<AdditiveOracle>(config.sample_weights, config.feature_weights,
                                              config.base, config.noise_sd);
    case EvaluatorKind::kBridge:
      return std::make_unique<BridgeEvaluator>(
          BridgeOptions{config.bridge_cmd, config.timeout, config.connections});
  }
  throw ConfigError("evaluator: unknown kind");
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  const Table table = load_csv(config.dataset, config.label);
  out.splits = split(table, config.split);
  auto& s = out.splits;
  switch (config.setting) {
    case Setting::kOriginal:
      break;
    case Setting::kDaSample:
      s.train = augment_samples(s.train, *config.augment);
      break;
    case Setting::kDaFeature:
      // Derived columns are a fixed function of the features, so every split
      // gets them.
      s.train = augment_features(s.train, *config.augment);
      s.val = augment_features(s.val, *config.augment);
      s.test = augment_features(s.test, *config.augment);
      break;
    case Setting::kDnS1:
    case Setting::kDnS2:
      s.train = inject_noise(s.train, *config.noise);
      break;
    case Setting::kDnF: {
      NoiseTrace trace;
      s.train = inject_noise(s.train, *config.noise, &trace);
      s.val = mirror_feature_noise(s.val, trace, derive_key(config.noise->seed, "val"));
      s.test = mirror_feature_noise(s.test, trace, derive_key(config.noise->seed, "test"));
      break;
    }
  }
  out.dataset_id = config.name.empty() ? config.dataset.stem().string() : config.name;
  return out;
}

}  // namespace vipcop::cli
