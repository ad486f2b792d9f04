#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vipcop/baselines.hpp"
#include "vipcop/csv.hpp"
#include "vipcop/engine.hpp"
#include "vipcop/evaluator.hpp"
#include "vipcop/transforms.hpp"

namespace vipcop::cli {

enum class Setting { kOriginal, kDaSample, kDaFeature, kDnS1, kDnS2, kDnF };

Setting parse_setting(std::string_view name);
std::string_view to_string(Setting setting);

enum class EvaluatorKind { kKnn, kOracle, kBridge };

struct EvaluatorConfig {
  EvaluatorKind kind = EvaluatorKind::kKnn;
  std::size_t k = 5;
  // knn: treat contexts above this size as out of memory.
  std::optional<Budget> capacity;
  std::string bridge_cmd;
  double timeout = 120.0;
  std::size_t connections = 1;
  // oracle
  std::vector<double> sample_weights;
  std::vector<double> feature_weights;
  double base = 0.5;
  double noise_sd = 0.0;
};

struct ExperimentConfig {
  std::filesystem::path dataset;
  LabelColumn label = std::size_t{0};
  std::string name;  // dataset id in reports; the file stem by default
  SplitSpec split;
  Setting setting = Setting::kOriginal;
  std::optional<AugmentSpec> augment;
  std::optional<NoiseSpec> noise;
  Budget budget;
  EngineConfig engine;
  EvaluatorConfig evaluator;
  std::vector<BaselineKind> baselines{std::begin(kAllBaselines), std::end(kAllBaselines)};
  BaselineSpec baseline;  // shared knobs; kind and runs are set per method
  std::size_t random_runs = 15;
  std::size_t ensemble_runs = 20;
  std::filesystem::path out = "results";
  std::uint64_t seed = 42;

  // Cross-field checks; ConfigError names the offending field.
  void validate() const;
  BaselineSpec baseline_spec(BaselineKind kind) const;
  // Pushes `seed` into the split, transforms, engine and baselines.
  void apply_seed(std::uint64_t value);
};

// Values given on the command line; each set field overrides the file.
struct Overrides {
  std::optional<std::string> dataset;
  std::optional<std::string> label;
  std::optional<std::string> setting;
  std::optional<std::size_t> budget_samples;
  std::optional<std::size_t> budget_features;
  std::optional<std::size_t> rounds;
  std::optional<double> eta;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::string> metric;
  std::optional<std::string> evaluator;
  std::optional<std::string> bridge_cmd;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

// Builds a config from parsed TOML/JSON. Unknown keys are errors. Relative
// dataset paths resolve against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
// Reads .toml or .json.
nlohmann::json read_config_file(const std::filesystem::path& path);

// File (optional) -> VIPCOP_SEED -> flags, then validate().
ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& file,
                                const Overrides& overrides);

nlohmann::json config_echo(const ExperimentConfig& config);

std::unique_ptr<Evaluator> make_evaluator(const EvaluatorConfig& config, const Budget& budget);

struct PreparedData {
  SplitResult splits;
  // Injected provenance is carried by splits.train.
  std::string dataset_id;
};

// Load, split, then transform the training split per the setting.
PreparedData prepare_data(const ExperimentConfig& config);

}  // namespace vipcop::cli
