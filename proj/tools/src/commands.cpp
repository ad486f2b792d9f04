#include "vipcop/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "vipcop/artifacts.hpp"
#include "vipcop/error.hpp"
#include "vipcop/stats.hpp"

namespace vipcop::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

fs::path cell_dir(const fs::path& out, const std::string& dataset, Setting setting,
                  const std::string& method) {
  return out / dataset / std::string(to_string(setting)) / method;
}

json run_engine_cell(const ExperimentConfig& config, const PreparedData& data,
                     const Evaluator& evaluator) {
  const auto start = Clock::now();
  const auto& s = data.splits;
  const OptimizeResult result = optimize(s.train, s.val, evaluator, config.budget, config.engine);
  const double score = evaluator.score_subset(s.train, result.selection, s.test,
                                              Metric::kBalancedAccuracy);
  const double wall = seconds_since(start);
  const RunResult& best = result.runs[result.best_run];

  std::size_t injected = 0;
  for (std::size_t r : result.selection.samples) injected += s.train.row_injected(r) ? 1 : 0;

  json row = {{"dataset", data.dataset_id},
              {"method", kEngineMethod},
              {"setting", to_string(config.setting)},
              {"score", score},
              {"val_estimate", best.estimated_val},
              {"context_size",
               {{"samples", result.selection.samples.size()},
                {"features", result.selection.features.size()}}},
              {"injected_samples_selected", injected},
              {"best_run", result.best_run},
              {"tau", best.tau},
              {"wall_time", wall},
              {"seed", config.seed}};
  if (config.engine.metric != Metric::kBalancedAccuracy) {
    row["test_" + std::string(to_string(config.engine.metric))] =
        evaluator.score_subset(s.train, result.selection, s.test, config.engine.metric);
  }

  json run = to_json(result, config.engine);
  run["experiment"] = config_echo(config);
  const fs::path dir = cell_dir(config.out, data.dataset_id, config.setting, kEngineMethod);
  write_file_atomic(dir / "run.json", dump(run));
  write_file_atomic(dir / "trajectory.csv", trajectory_csv(best));
  write_file_atomic(dir / "row.json", dump(row));
  return row;
}

json run_baseline_cell(const ExperimentConfig& config, const PreparedData& data,
                       const Evaluator& evaluator, BaselineKind kind) {
  const auto& s = data.splits;
  const BaselineReport report =
      run_baseline(s.train, s.val, s.test, evaluator, config.budget, config.baseline_spec(kind));
  json row = report_row(report, data.dataset_id, to_string(config.setting));
  json run = row;
  run["experiment"] = config_echo(config);
  if (report.selection) run["selection"] = to_json(*report.selection);
  const fs::path dir = cell_dir(config.out, data.dataset_id, config.setting, report.method);
  // Per-run index lists live in run.json only; the row stays small.
  row.erase("details");
  write_file_atomic(dir / "run.json", dump(run));
  write_file_atomic(dir / "row.json", dump(row));
  return row;
}

int cmd_optimize(const ExperimentConfig& config, std::ostream& out) {
  const PreparedData data = prepare_data(config);
  const auto evaluator = make_evaluator(config.evaluator, config.budget);
  const json row = run_engine_cell(config, data, *evaluator);
  out << kEngineMethod << ' ' << data.dataset_id << '/' << to_string(config.setting)
      << ": test bacc " << fixed(row["score"].get<double>(), 4) << " (val estimate "
      << fixed(row["val_estimate"].get<double>(), 4) << "), context "
      << row["context_size"]["samples"] << "x" << row["context_size"]["features"] << ", "
      << fixed(row["wall_time"].get<double>(), 2) << "s\n";
  return kExitOk;
}

int cmd_baseline(const ExperimentConfig& config, const std::vector<BaselineKind>& methods,
                 std::ostream& out, std::ostream& err) {
  const PreparedData data = prepare_data(config);
  const auto evaluator = make_evaluator(config.evaluator, config.budget);
  int status = kExitOk;
  for (BaselineKind kind : methods) {
    try {
      const json row = run_baseline_cell(config, data, *evaluator, kind);
      out << method_id(kind) << ' ' << data.dataset_id << '/' << to_string(config.setting)
          << ": test bacc " << fixed(row["score"].get<double>(), 4) << ", "
          << fixed(row["wall_time"].get<double>(), 2) << "s\n";
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      err << method_id(kind) << " failed: " << e.what() << '\n';
      status = kExitPartial;
    }
  }
  return status;
}

namespace {

struct Row {
  std::string dataset;
  std::string setting;
  std::string method;
  double score = 0.0;
  fs::path dir;
};

std::vector<Row> scan_rows(const fs::path& root) {
  std::vector<Row> rows;
  if (!fs::is_directory(root)) return rows;
  for (const auto& ds : fs::directory_iterator(root)) {
    if (!ds.is_directory()) continue;
    for (const auto& st : fs::directory_iterator(ds.path())) {
      if (!st.is_directory()) continue;
      for (const auto& me : fs::directory_iterator(st.path())) {
        const fs::path file = me.path() / "row.json";
        if (!fs::is_regular_file(file)) continue;
        const json j = read_json_file(file);
        if (!j.contains("score") || !j["score"].is_number()) {
          throw DataError(file.string() + ": row without a numeric score");
        }
        rows.push_back({ds.path().filename().string(), st.path().filename().string(),
                        me.path().filename().string(), j["score"].get<double>(), me.path()});
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.dataset, a.setting, a.method) < std::tie(b.dataset, b.setting, b.method);
  });
  return rows;
}

// Writes report/{summary.md, ranks.csv, stats.json, trajectories.csv}.
void write_report(const fs::path& root, std::ostream& out) {
  const auto rows = scan_rows(root);
  if (rows.empty()) throw ConfigError("no results under " + root.string());
  std::set<std::string> method_set;
  std::map<std::string, std::map<std::string, double>> cells;
  for (const auto& r : rows) {
    method_set.insert(r.method);
    cells[r.dataset + "/" + r.setting][r.method] = r.score;
  }
  std::vector<std::string> methods(method_set.begin(), method_set.end());
  const auto engine = std::find(methods.begin(), methods.end(), kEngineMethod);
  if (engine != methods.end()) std::rotate(methods.begin(), engine, engine + 1);
  if (methods.size() < 2) throw ConfigError("need rows for at least 2 methods to compare");

  ScoreMatrix matrix;
  matrix.method_ids = methods;
  std::vector<std::string> incomplete;
  for (const auto& [dataset, by_method] : cells) {
    if (by_method.size() != methods.size()) {
      incomplete.push_back(dataset);
      continue;
    }
    matrix.dataset_ids.push_back(dataset);
    for (const auto& m : methods) matrix.scores.push_back(by_method.at(m));
  }
  if (matrix.dataset_ids.empty()) throw ConfigError("no dataset has rows for every method");

  StatsOptions options;
  if (engine != methods.end() || methods.front() == kEngineMethod) options.reference = kEngineMethod;
  const StatsReport report = build_stats_report(matrix, options);

  // Anytime curves of every run that kept one.
  std::ostringstream traj;
  traj << "dataset,setting,method,round,best_so_far,elapsed_seconds\n";
  std::ostringstream traj_md;
  for (const auto& r : rows) {
    std::ifstream in(r.dir / "trajectory.csv");
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    std::string last;
    std::size_t rounds = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      traj << r.dataset << ',' << r.setting << ',' << r.method << ',' << line << '\n';
      last = line;
      ++rounds;
    }
    if (rounds > 0) {
      const auto c1 = last.find(',');
      const auto c2 = last.find(',', c1 + 1);
      const double best = std::stod(last.substr(c1 + 1, c2 - c1 - 1));
      const double elapsed = std::stod(last.substr(c2 + 1));
      traj_md << "| " << r.dataset << " | " << r.setting << " | " << r.method << " | " << rounds
              << " | " << fixed(best, 4) << " | " << fixed(elapsed, 2) << " |\n";
    }
  }

  std::string md = report.markdown();
  if (!incomplete.empty()) {
    md += "\nLeft out (missing methods):";
    for (const auto& d : incomplete) md += " " + d;
    md += "\n";
  }
  if (!traj_md.str().empty()) {
    md += "\n## Anytime trajectories\n\n| dataset | setting | method | rounds | best so far | elapsed s |\n|---|---|---|---|---|---|\n" +
          traj_md.str();
  }
  json stats = report.to_json();
  stats["incomplete"] = incomplete;
  const fs::path dir = root / "report";
  write_file_atomic(dir / "summary.md", md);
  write_file_atomic(dir / "ranks.csv", report.rank_csv());
  write_file_atomic(dir / "stats.json", dump(stats));
  write_file_atomic(dir / "trajectories.csv", traj.str());
  out << "report: " << matrix.datasets() << " datasets x " << matrix.methods() << " methods -> "
      << dir.string() << '\n';
}

std::vector<fs::path> config_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".toml" || ext == ".json")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .toml or .json configs in " + dir.string());
  return files;
}

}  // namespace

int cmd_report(const fs::path& results_dir, std::ostream& out) {
  write_report(results_dir, out);
  return kExitOk;
}

int cmd_bench(const fs::path& config_dir, const Overrides& overrides, std::size_t jobs,
              bool force, std::ostream& out, std::ostream& err) {
  struct Experiment {
    ExperimentConfig config;
    PreparedData data;
    std::unique_ptr<Evaluator> evaluator;
  };
  std::vector<Experiment> experiments;
  for (const auto& file : config_files(config_dir)) {
    Experiment e;
    e.config = resolve_config(file, overrides);
    e.data = prepare_data(e.config);
    e.evaluator = make_evaluator(e.config.evaluator, e.config.budget);
    experiments.push_back(std::move(e));
  }

  struct Cell {
    std::size_t experiment;
    std::optional<BaselineKind> baseline;  // engine when unset
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    cells.push_back({i, std::nullopt});
    for (BaselineKind k : experiments[i].config.baselines) cells.push_back({i, k});
  }

  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      const auto& cell = cells[c];
      const auto& e = experiments[cell.experiment];
      const std::string method =
          cell.baseline ? std::string(method_id(*cell.baseline)) : std::string(kEngineMethod);
      const fs::path dir = cell_dir(e.config.out, e.data.dataset_id, e.config.setting, method);
      const std::string label = e.data.dataset_id + "/" + std::string(to_string(e.config.setting)) + "/" + method;
      if (!force && fs::is_regular_file(dir / "row.json")) {
        std::lock_guard lock(io);
        out << label << ": kept existing row\n";
        continue;
      }
      try {
        fs::remove(dir / "error.json");
        const json row = cell.baseline ? run_baseline_cell(e.config, e.data, *e.evaluator, *cell.baseline)
                                       : run_engine_cell(e.config, e.data, *e.evaluator);
        std::lock_guard lock(io);
        out << label << ": " << fixed(row["score"].get<double>(), 4) << '\n';
      } catch (const std::exception& ex) {
        ++failed;
        write_file_atomic(dir / "error.json", dump({{"error", ex.what()}, {"method", method}}));
        std::lock_guard lock(io);
        err << label << " failed: " << ex.what() << '\n';
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  std::set<fs::path> roots;
  for (const auto& e : experiments) roots.insert(e.config.out);
  for (const auto& root : roots) {
    try {
      write_report(root, out);
    } catch (const Error& ex) {
      err << "report for " << root.string() << " skipped: " << ex.what() << '\n';
      ++failed;
    }
  }
  return failed > 0 ? kExitPartial : kExitOk;
}

namespace {

void add_common(CLI::App* app, std::optional<std::string>& config, Overrides& o) {
  app->add_option("--config", config, "Experiment config (.toml or .json)");
  app->add_option("--dataset", o.dataset, "CSV dataset path");
  app->add_option("--label", o.label, "Label column name or index");
  app->add_option("--setting", o.setting, "original, da_sample, da_feature, dn_s1, dn_s2, dn_f");
  app->add_option("--budget-samples", o.budget_samples, "Context rows n_C");
  app->add_option("--budget-features", o.budget_features, "Context columns d_C");
  app->add_option("--rounds", o.rounds, "Rounds R");
  app->add_option("--eta", o.eta, "Schedule base eta");
  app->add_option("--batch", o.batch, "Subsets per round B");
  app->add_option("--lr", o.lr, "SGD learning rate (default 0.5 / subset size)");
  app->add_option("--metric", o.metric, "bacc or auroc");
  app->add_option("--evaluator", o.evaluator, "knn, oracle or bridge");
  app->add_option("--bridge-cmd", o.bridge_cmd, "Bridge child command");
  app->add_option("--seed", o.seed, "Seed (overrides VIPCOP_SEED and the config)");
  app->add_option("--out", o.out, "Results directory");
}

std::optional<fs::path> as_path(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  return fs::path(*s);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context optimization for tabular in-context learners", "vipcop"};
  app.require_subcommand(1);

  std::optional<std::string> config;
  Overrides overrides;
  std::string method;
  std::string config_dir;
  std::string results_dir;
  std::size_t jobs = 1;
  bool force = false;

  auto* optimize_cmd = app.add_subcommand("optimize", "Run the context optimizer");
  add_common(optimize_cmd, config, overrides);
  auto* baseline_cmd = app.add_subcommand("baseline", "Run a comparison method");
  add_common(baseline_cmd, config, overrides);
  baseline_cmd->add_option("--method", method, "h1, h2, h3, o1, o2 or all")->required();
  auto* bench_cmd = app.add_subcommand("bench", "Run the optimizer and baselines over a config directory");
  bench_cmd->add_option("config_dir", config_dir, "Directory of experiment configs")->required();
  add_common(bench_cmd, config, overrides);
  bench_cmd->add_option("--jobs", jobs, "Concurrent cells");
  bench_cmd->add_flag("--force", force, "Recompute existing rows");
  auto* report_cmd = app.add_subcommand("report", "Rebuild summaries from stored rows");
  report_cmd->add_option("results_dir", results_dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (optimize_cmd->parsed()) {
      return cmd_optimize(resolve_config(as_path(config), overrides), out);
    }
    if (baseline_cmd->parsed()) {
      std::vector<BaselineKind> methods;
      if (method == "all") {
        methods.assign(std::begin(kAllBaselines), std::end(kAllBaselines));
      } else {
        methods.push_back(parse_baseline(method));
      }
      return cmd_baseline(resolve_config(as_path(config), overrides), methods, out, err);
    }
    if (bench_cmd->parsed()) {
      if (config) throw ConfigError("bench takes a config directory, not --config");
      return cmd_bench(config_dir, overrides, jobs, force, out, err);
    }
    return cmd_report(results_dir, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPartial;
  }
}

}  // namespace vipcop::cli
