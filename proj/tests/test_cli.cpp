#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "vipcop/artifacts.hpp"
#include "vipcop/cli/commands.hpp"
#include "vipcop/cli/config.hpp"
#include "vipcop/cli/toml.hpp"
#include "vipcop/error.hpp"

using namespace vipcop;
using namespace vipcop::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

void write_blobs_csv(const fs::path& p, std::size_t n, std::uint64_t seed) {
  const Table t = vipcop::testing::gaussian_blobs(n, 6, seed);
  std::ostringstream os;
  os << "y";
  for (std::size_t j = 0; j < 6; ++j) os << ",f" << j;
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    os << (t.label(i) == 0 ? "neg" : "pos");
    for (std::size_t j = 0; j < 6; ++j) os << ',' << t.at(i, j);
    os << "\n";
  }
  write_text(p, os.str());
}

struct Cli {
  int code = 0;
  std::string out;
  std::string err;
};

Cli run(std::vector<std::string> args) {
  args.insert(args.begin(), "vipcop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Cli r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string small_config(const fs::path& csv, const fs::path& out, const std::string& extra = "") {
  return "seed = 42\nout = \"" + out.string() + "\"\n" + extra +
         "\n[dataset]\npath = \"" + csv.string() + "\"\nlabel = \"y\"\n"
         "\n[budget]\nsamples = 30\nfeatures = 3\n"
         "\n[engine]\nrounds = 16\nbatch = 4\n";
}

}  // namespace

TEST(Toml, TablesScalarsAndArrays) {
  const json j = parse_toml(R"(
# comment
seed = 7
name = "a # not a comment"
flag = true
[engine]
rounds = 100   # trailing
eta = 2.5
weights = [0.1, -0.2, 3]
[dataset]
path = 'raw\path.csv'
)");
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["name"], "a # not a comment");
  EXPECT_EQ(j["flag"], true);
  EXPECT_EQ(j["engine"]["rounds"], 100);
  EXPECT_DOUBLE_EQ(j["engine"]["eta"].get<double>(), 2.5);
  EXPECT_EQ(j["engine"]["weights"].size(), 3u);
  EXPECT_EQ(j["dataset"]["path"], "raw\\path.csv");
}

TEST(Toml, ErrorsNameTheLine) {
  try {
    parse_toml("a = 1\nb = \n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_toml("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_toml("[x\n"), ConfigError);
  EXPECT_THROW(parse_toml("s = \"open\n"), ConfigError);
}

TEST(Config, UnknownKeyNamesField) {
  vipcop::testing::TempDir dir("cfg_unknown");
  write_text(dir.path() / "c.toml", "[dataset]\npath = \"x.csv\"\n[engine]\nroundz = 5\n");
  const auto r = run({"optimize", "--config", (dir.path() / "c.toml").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("engine.roundz"), std::string::npos) << r.err;
}

TEST(Config, CrossFieldValidation) {
  json j = {{"dataset", {{"path", "d.csv"}}}, {"setting", "dn_s1"}};
  try {
    config_from_json(j).validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("noise"), std::string::npos);
  }
  j["noise"] = {{"kind", "F1"}, {"drop_fraction", 0.5}};
  EXPECT_THROW(config_from_json(j).validate(), ConfigError);
  j["noise"]["kind"] = "S1";
  EXPECT_NO_THROW(config_from_json(j).validate());
  json bad = {{"dataset", {{"path", "d.csv"}}}, {"evaluator", {{"kind", "bridge"}}}};
  try {
    config_from_json(bad).validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("evaluator.bridge_cmd"), std::string::npos);
  }
  json typed = {{"dataset", {{"path", "d.csv"}}}, {"budget", {{"samples", "many"}}}};
  EXPECT_THROW(config_from_json(typed), ConfigError);
}

TEST(Config, PrecedenceFlagsOverEnvOverFile) {
  vipcop::testing::TempDir dir("cfg_prec");
  write_text(dir.path() / "c.toml", "seed = 5\n[dataset]\npath = \"d.csv\"\n");
  Overrides none;
  ::unsetenv("VIPCOP_SEED");
  EXPECT_EQ(resolve_config(dir.path() / "c.toml", none).seed, 5u);
  ::setenv("VIPCOP_SEED", "9", 1);
  const auto env = resolve_config(dir.path() / "c.toml", none);
  EXPECT_EQ(env.seed, 9u);
  EXPECT_EQ(env.engine.seed, 9u);
  EXPECT_EQ(env.baseline_spec(BaselineKind::kRandomMean).seed, 9u);
  Overrides flag;
  flag.seed = 11;
  EXPECT_EQ(resolve_config(dir.path() / "c.toml", flag).seed, 11u);
  ::setenv("VIPCOP_SEED", "nope", 1);
  EXPECT_THROW(resolve_config(dir.path() / "c.toml", none), ConfigError);
  ::unsetenv("VIPCOP_SEED");
  EXPECT_EQ(resolve_config(dir.path() / "c.toml", none).dataset, dir.path() / "d.csv");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"optimize", "--rounds", "abc"}).code, kExitUsage);
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("optimize"), std::string::npos);
  EXPECT_EQ(run({"optimize", "--dataset", "/no/such/file.csv"}).code, kExitUsage);
}

TEST(Cli, OptimizeWritesArtifactsDeterministically) {
  vipcop::testing::TempDir dir("cli_opt");
  const auto csv = dir.path() / "blobs.csv";
  write_blobs_csv(csv, 240, 1);
  const auto args = std::vector<std::string>{
      "optimize", "--dataset", csv.string(), "--label", "y", "--budget-samples", "30",
      "--budget-features", "3", "--rounds", "16", "--batch", "4", "--out",
      (dir.path() / "a").string()};
  const auto r = run(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto cell = dir.path() / "a" / "blobs" / "original" / "vipcop";
  ASSERT_TRUE(fs::exists(cell / "row.json"));
  ASSERT_TRUE(fs::exists(cell / "run.json"));
  ASSERT_TRUE(fs::exists(cell / "trajectory.csv"));
  const json row = read_json_file(cell / "row.json");
  EXPECT_EQ(row["method"], "vipcop");
  EXPECT_LE(row["context_size"]["samples"].get<std::size_t>(), 30u);
  EXPECT_EQ(row["context_size"]["features"], 3);
  EXPECT_GE(row["score"].get<double>(), 0.0);
  const json run_json = read_json_file(cell / "run.json");
  EXPECT_EQ(run_json["config"]["learning_rate"], "auto");

  auto again = args;
  again.back() = (dir.path() / "b").string();
  ASSERT_EQ(run(again).code, kExitOk);
  const json row2 = read_json_file(dir.path() / "b" / "blobs" / "original" / "vipcop" / "row.json");
  EXPECT_EQ(row["score"], row2["score"]);
  EXPECT_EQ(read_json_file(cell / "run.json")["selection"],
            read_json_file(dir.path() / "b" / "blobs" / "original" / "vipcop" / "run.json")["selection"]);
}

TEST(Cli, BaselineAllWritesFiveRows) {
  vipcop::testing::TempDir dir("cli_base");
  const auto csv = dir.path() / "blobs.csv";
  write_blobs_csv(csv, 240, 2);
  write_text(dir.path() / "c.toml", small_config(csv, dir.path() / "out"));
  const auto r = run({"baseline", "--method", "all", "--config", (dir.path() / "c.toml").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* m : {"h1", "h2", "h3", "o1", "o2"}) {
    const auto row = dir.path() / "out" / "blobs" / "original" / m / "row.json";
    ASSERT_TRUE(fs::exists(row)) << m;
    EXPECT_FALSE(read_json_file(row).contains("details"));
  }
  EXPECT_EQ(run({"baseline", "--method", "zz", "--config", (dir.path() / "c.toml").string()}).code,
            kExitUsage);
}

TEST(Cli, BenchGridResumeAndReport) {
  vipcop::testing::TempDir dir("cli_bench");
  const auto out = dir.path() / "results";
  for (int i = 0; i < 3; ++i) {
    const auto csv = dir.path() / ("ds" + std::to_string(i) + ".csv");
    write_blobs_csv(csv, 200, 10 + i);
    write_text(dir.path() / "configs" / ("c" + std::to_string(i) + ".toml"), small_config(csv, out));
  }
  const auto first = run({"bench", (dir.path() / "configs").string(), "--jobs", "2"});
  ASSERT_EQ(first.code, kExitOk) << first.err;
  std::size_t rows = 0;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.path().filename() == "row.json") ++rows;
  }
  EXPECT_EQ(rows, 18u);
  for (const char* f : {"summary.md", "ranks.csv", "stats.json", "trajectories.csv"}) {
    EXPECT_TRUE(fs::exists(out / "report" / f)) << f;
  }
  const json stats = read_json_file(out / "report" / "stats.json");
  EXPECT_EQ(stats["methods"].size(), 6u);
  EXPECT_EQ(stats["datasets"].size(), 3u);
  EXPECT_EQ(stats["reference"], "vipcop");

  const auto row_path = out / "ds0" / "original" / "h1" / "row.json";
  const auto before = fs::last_write_time(row_path);
  const json score_before = read_json_file(row_path)["score"];
  const auto resumed = run({"bench", (dir.path() / "configs").string()});
  EXPECT_EQ(resumed.code, kExitOk);
  EXPECT_NE(resumed.out.find("kept existing row"), std::string::npos);
  EXPECT_EQ(fs::last_write_time(row_path), before);
  const auto forced = run({"bench", (dir.path() / "configs").string(), "--force"});
  EXPECT_EQ(forced.code, kExitOk);
  EXPECT_EQ(forced.out.find("kept existing row"), std::string::npos);
  EXPECT_EQ(read_json_file(row_path)["score"], score_before);
}

TEST(Cli, ReportNeedsResults) {
  vipcop::testing::TempDir dir("cli_report");
  EXPECT_EQ(run({"report", dir.path().string()}).code, kExitUsage);
  write_text(dir.path() / "d1" / "original" / "h1" / "row.json", R"({"score": 0.7})");
  EXPECT_EQ(run({"report", dir.path().string()}).code, kExitUsage);
  write_text(dir.path() / "d1" / "original" / "vipcop" / "row.json", R"({"score": 0.8})");
  write_text(dir.path() / "d2" / "original" / "h1" / "row.json", R"({"score": 0.6})");
  write_text(dir.path() / "d2" / "original" / "vipcop" / "row.json", R"({"score": 0.9})");
  write_text(dir.path() / "d3" / "original" / "h1" / "row.json", R"({"score": 0.5})");
  const auto r = run({"report", dir.path().string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json stats = read_json_file(dir.path() / "report" / "stats.json");
  EXPECT_EQ(stats["datasets"].size(), 2u);
  EXPECT_EQ(stats["incomplete"], json::array({"d3/original"}));
  EXPECT_EQ(stats["methods"][0], "vipcop");
}

TEST(Cli, NoisySettingEndToEnd) {
  vipcop::testing::TempDir dir("cli_noise");
  const auto csv = dir.path() / "blobs.csv";
  write_blobs_csv(csv, 240, 3);
  write_text(dir.path() / "c.toml",
             small_config(csv, dir.path() / "out", "setting = \"dn_s1\"") +
                 "\n[noise]\nkind = \"S1\"\ndrop_fraction = 0.5\n");
  const auto r = run({"optimize", "--config", (dir.path() / "c.toml").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json row = read_json_file(dir.path() / "out" / "blobs" / "dn_s1" / "vipcop" / "row.json");
  EXPECT_TRUE(row.contains("injected_samples_selected"));
}

TEST(Cli, BridgeEvaluatorThroughMock) {
  vipcop::testing::TempDir dir("cli_bridge");
  const auto csv = dir.path() / "blobs.csv";
  write_blobs_csv(csv, 120, 4);
  const auto r = run({"baseline", "--method", "h1", "--dataset", csv.string(), "--label", "y",
                      "--budget-samples", "30", "--budget-features", "3", "--evaluator", "bridge",
                      "--bridge-cmd", MOCK_BRIDGE_PATH, "--out", (dir.path() / "o").string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}
