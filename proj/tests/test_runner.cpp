#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "perclap/perclap.hpp"

using namespace perclap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("perclap_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::directory_iterator(dir)) m[e.path().filename().string()] = slurp(e.path());
  return m;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(PERCLAP_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MinimalDefaults) {
  const auto c = parse_config_string(R"({"d":1,"L":1000,"p":0.3,"task":"ids"})");
  EXPECT_EQ(c.realizations, 1u);
  EXPECT_EQ(c.grid, GridSpec{});
  EXPECT_EQ(c.boundary_conditions.size(), 3u);
  EXPECT_EQ(c.task, Task::ids);
}

TEST(Config, RejectsOutOfRangeAndUnknown) {
  EXPECT_THROW(parse_config_string(R"({"d":1,"L":1000,"p":1.2})"), ConfigError);
  EXPECT_THROW(parse_config_string(R"({"d":1,"L":1000,"p":0.3,"colour":"red"})"), ConfigError);
  EXPECT_THROW(parse_config_string(R"({"d":1,"L":1000})"), ConfigError);
  EXPECT_THROW(parse_config_string("{not json"), ConfigError);
  EXPECT_THROW(parse_config_string(R"({"d":2,"L":10,"p":0.5})"), ConfigError);
  EXPECT_NO_THROW(parse_config_string(R"({"d":2,"L":10,"p":0.5,"subcritical_guard":false})"));
}

TEST(Config, ReportsEveryViolation) {
  try {
    parse_config_string(R"({"d":7,"L":1,"p":0.3,"grid":{"points":1}})");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("d must"), std::string::npos);
    EXPECT_NE(m.find("L must"), std::string::npos);
    EXPECT_NE(m.find("grid.points"), std::string::npos);
  }
}

TEST(Config, RoundTrip) {
  ExperimentConfig c;
  c.task = Task::verify;
  c.d = 2;
  c.L = 12;
  c.p = 0.3;
  c.realizations = 7;
  c.seed = 99;
  c.boundary_conditions = {Boundary::dirichlet, Boundary::neumann};
  c.grid = {100, 5};
  c.tail_mode = TailMode::empirical;
  c.tail_window = {1e-4, 1e-1, 12};
  c.cheeger_limit = 12;
  EXPECT_EQ(parse_config_string(serialize(c)), c);
}

TEST(Runner, ParallelMapKeepsOrder) {
  const auto v = parallel_map(50, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], i * i);
}

TEST(Runner, DeterministicAcrossThreadCounts) {
  auto c = parse_config_string(R"({"task":"all","d":2,"L":10,"p":0.3,"realizations":6,"seed":5,
                                   "tail":{"mode":"empirical"},"decay":{"samples":2000}})");
  std::map<std::string, std::string> first;
  for (unsigned threads : {1u, 3u}) {
    const auto dir = scratch("det" + std::to_string(threads));
    RunOptions opt;
    opt.threads = threads;
    opt.output_dir = dir.string();
    const auto rep = run(c, opt);
    EXPECT_EQ(rep.exit_code, 0);
    EXPECT_EQ(rep.violations, 0u);
    auto files = directory_contents(dir);
    if (first.empty())
      first = files;
    else
      EXPECT_EQ(files, first);
  }
}

TEST(Runner, ManifestHashesMatchFiles) {
  const auto dir = scratch("manifest");
  auto c = parse_config_string(R"({"task":"ids","d":1,"L":5000,"p":0.3})");
  RunOptions opt;
  opt.output_dir = dir.string();
  run(c, opt);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_FALSE(m["config"].contains("output_dir"));
  ASSERT_EQ(m["outputs"].size(), 6u);
  for (const auto& o : m["outputs"]) EXPECT_EQ(o["sha256"], sha256_hex(slurp(dir / o["file"].get<std::string>())));
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Runner, IdsKappaAtZero) {
  const auto dir = scratch("kappa");
  auto c = parse_config_string(R"({"task":"ids","d":1,"L":1000000,"p":0.3,"boundary_conditions":["N"]})");
  RunOptions opt;
  opt.output_dir = dir.string();
  run(c, opt);
  const auto s = nlohmann::json::parse(slurp(dir / "ids_N_summary.json"));
  EXPECT_NEAR(s["kappa_hat"].get<double>(), 0.7, 3 * std::sqrt(0.21 / 1e6));
  const auto csv = slurp(dir / "ids_N.csv");
  EXPECT_EQ(csv.substr(0, 4), "E,N\n");
}

TEST(Runner, AnalyticTails) {
  const auto dir = scratch("tails");
  auto c = parse_config_string(R"({"task":"tails","d":1,"L":100,"p":0.3})");
  RunOptions opt;
  opt.output_dir = dir.string();
  run(c, opt);
  const auto n = nlohmann::json::parse(slurp(dir / "tail_N_lower.json"));
  EXPECT_GE(n["slope"].get<double>(), -0.55);
  EXPECT_LE(n["slope"].get<double>(), -0.45);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "tails_summary.json"))["reflection_identical"].get<bool>());
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "good.json") << R"({"d":1,"L":200,"p":0.3})";
  std::ofstream(dir / "bad.json") << R"({"d":1,"L":200,"p":1.2})";
  std::ofstream(dir / "unknown.json") << R"({"d":1,"L":200,"p":0.3,"foo":1})";
  const auto out = " --out " + (dir / "out").string();
  EXPECT_EQ(run_cli("ids --config " + (dir / "good.json").string() + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
  EXPECT_EQ(run_cli("ids --config " + (dir / "bad.json").string() + out), 2);
  EXPECT_EQ(run_cli("ids --config " + (dir / "unknown.json").string() + out), 2);
  EXPECT_EQ(run_cli("ids --config " + (dir / "missing.json").string() + out), 2);
  EXPECT_EQ(run_cli("bogus --config " + (dir / "good.json").string() + out), 2);
  EXPECT_EQ(run_cli("ids"), 2);
}
