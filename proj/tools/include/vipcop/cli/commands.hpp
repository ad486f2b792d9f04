#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vipcop/cli/config.hpp"

namespace vipcop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kEngineMethod = "vipcop";

// results/<dataset>/<setting>/<method>
std::filesystem::path cell_dir(const std::filesystem::path& out, const std::string& dataset,
                               Setting setting, const std::string& method);

// Runs the engine and writes run.json, trajectory.csv and row.json; returns the row.
nlohmann::json run_engine_cell(const ExperimentConfig& config, const PreparedData& data,
                               const Evaluator& evaluator);
// Runs one baseline and writes run.json and row.json; returns the row.
nlohmann::json run_baseline_cell(const ExperimentConfig& config, const PreparedData& data,
                                 const Evaluator& evaluator, BaselineKind kind);

int cmd_optimize(const ExperimentConfig& config, std::ostream& out);
int cmd_baseline(const ExperimentConfig& config, const std::vector<BaselineKind>& methods,
                 std::ostream& out, std::ostream& err);
int cmd_bench(const std::filesystem::path& config_dir, const Overrides& overrides,
              std::size_t jobs, bool force, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& results_dir, std::ostream& out);

// Parses arguments and dispatches; maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vipcop::cli
