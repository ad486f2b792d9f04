#include "vipcop/artifacts.hpp"

#include <fstream>
#include <sstream>

#include "vipcop/error.hpp"

namespace vipcop {

using nlohmann::json;

json to_json(const EngineConfig& config) {
  json j = {{"rounds", config.rounds},
            {"eta", config.eta},
            {"batch", config.batch},
            {"learning_rate", config.learning_rate ? json(*config.learning_rate) : json("auto")},
            {"seed", config.seed},
            {"metric", to_string(config.metric)},
            {"intercept", config.intercept},
            {"class_coverage_fixup", config.class_coverage_fixup},
            {"parallel_eval", config.parallel_eval},
            {"parallel_runs", config.parallel_runs},
            {"early_stop", config.early_stop}};
  if (config.intercept) j["estimated_val_includes_intercept"] = true;
  return j;
}

json to_json(const ContextSelection& selection) {
  return {{"samples", selection.samples}, {"features", selection.features}};
}

ContextSelection selection_from_json(const json& j) {
  try {
    return {j.at("samples").get<std::vector<std::size_t>>(),
            j.at("features").get<std::vector<std::size_t>>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("selection: ") + e.what());
  }
}

json to_json(const RunResult& run) {
  json j = {{"run_id", run.run_id},
            {"tau", run.tau},
            {"estimated_val", run.estimated_val},
            {"selected", to_json(run.selected)},
            {"phi_final", run.phi_final},
            {"trajectory", run.trajectory},
            {"round_estimate", run.round_estimate},
            {"round_seconds", run.round_seconds},
            {"engine_seconds", run.engine_seconds},
            {"rounds_completed", run.rounds_completed},
            {"evaluator_calls", run.evaluator_calls},
            {"stopped_early", run.stopped_early}};
  j["intercept"] = run.intercept ? json(*run.intercept) : json(nullptr);
  j["error"] = run.error ? json(*run.error) : json(nullptr);
  return j;
}

json to_json(const OptimizeResult& result, const EngineConfig& config) {
  json runs = json::array();
  for (const auto& r : result.runs) runs.push_back(to_json(r));
  return {{"config", to_json(config)},
          {"schedule", result.schedule},
          {"best_run", result.best_run},
          {"selection", to_json(result.selection)},
          {"runs", std::move(runs)}};
}

std::string trajectory_csv(const RunResult& run) {
  std::ostringstream os;
  os.precision(17);
  os << "round,best_so_far,elapsed_seconds\n";
  double elapsed = 0.0;
  for (std::size_t t = 0; t < run.trajectory.size(); ++t) {
    if (t < run.round_seconds.size()) elapsed += run.round_seconds[t];
    os << t + 1 << ',' << run.trajectory[t] << ',' << elapsed << '\n';
  }
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace vipcop
