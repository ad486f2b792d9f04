#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "vipcop/engine.hpp"

namespace vipcop {

nlohmann::json to_json(const EngineConfig& config);
nlohmann::json to_json(const ContextSelection& selection);
nlohmann::json to_json(const RunResult& run);
// Config echo, schedule, best run index, selection and every run.
nlohmann::json to_json(const OptimizeResult& result, const EngineConfig& config);

ContextSelection selection_from_json(const nlohmann::json& j);

// CSV with header round,best_so_far,elapsed_seconds; elapsed is cumulative.
std::string trajectory_csv(const RunResult& run);

// Writes `text` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace vipcop
