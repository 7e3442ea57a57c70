#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "epic/runner.hpp"

using namespace epic;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config(const std::string& dir) {
  ExperimentConfig cfg = parse_config_text(R"(
[env]
name = chain_suite
H = 5
discount = 0.9

[algo]
name = epicg
K = 8
N = 4
M = 2
beta = 0.01

[run]
seeds = 1,2
)");
  cfg.output_dir = dir;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run writes per-seed files and a summary") {
  TempDir tmp("epic_runner_basic");
  const ExperimentConfig cfg = tiny_config(tmp.path.string());
  run_experiment(cfg);

  for (int seed : {1, 2}) {
    const fs::path seed_dir = tmp.path / ("seed_" + std::to_string(seed));
    CHECK(fs::exists(seed_dir / "rewards.csv"));
    CHECK(fs::exists(seed_dir / "bounds.csv"));
    CHECK(fs::exists(seed_dir / "snapshots.json"));
  }
  const auto summary = nlohmann::json::parse(slurp(tmp.path / "summary.json"));
  CHECK(summary["per_seed"].size() == 2);
  CHECK(summary.contains("final_window_mean"));
  CHECK(summary.contains("config_text"));

  // K = N would give exactly one bounds row; here K = 2N gives two.
  std::istringstream bounds(slurp(tmp.path / "seed_1" / "bounds.csv"));
  std::string line;
  int rows = -1;  // header
  while (std::getline(bounds, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("single update when K equals N") {
  TempDir tmp("epic_runner_kn");
  ExperimentConfig cfg = tiny_config(tmp.path.string());
  cfg.K = 4;
  cfg.N = 4;
  run_experiment(cfg);
  std::istringstream bounds(slurp(tmp.path / "seed_1" / "bounds.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(bounds, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1);
}

TEST_CASE("csv schema is stable (golden header check)") {
  TempDir tmp("epic_runner_schema");
  const ExperimentConfig cfg = tiny_config(tmp.path.string());
  run_experiment(cfg);
  std::istringstream rewards(slurp(tmp.path / "seed_1" / "rewards.csv"));
  std::string header;
  std::getline(rewards, header);
  CHECK(header == "task_index,slip,reward_scale,reward,update_index");

  std::istringstream bounds(slurp(tmp.path / "seed_1" / "bounds.csv"));
  std::getline(bounds, header);
  CHECK(header ==
        "update_index,kl_step,kl_running_sum,kl_budget,training_regularizer,theorem1_bound,"
        "r_hat,s_min_hat");
}

TEST_CASE("same config and seed produce byte-identical csvs") {
  TempDir a("epic_runner_det_a");
  TempDir b("epic_runner_det_b");
  ExperimentConfig cfg_a = tiny_config(a.path.string());
  ExperimentConfig cfg_b = tiny_config(b.path.string());
  run_experiment(cfg_a);
  run_experiment(cfg_b);
  for (int seed : {1, 2}) {
    const std::string s = "seed_" + std::to_string(seed);
    CHECK(slurp(a.path / s / "rewards.csv") == slurp(b.path / s / "rewards.csv"));
    CHECK(slurp(a.path / s / "bounds.csv") == slurp(b.path / s / "bounds.csv"));
    CHECK(slurp(a.path / s / "snapshots.json") == slurp(b.path / s / "snapshots.json"));
  }
}

TEST_CASE("re-running from the embedded config reproduces the outputs") {
  TempDir first("epic_runner_embed_a");
  ExperimentConfig cfg = tiny_config(first.path.string());
  run_experiment(cfg);
  const auto summary = nlohmann::json::parse(slurp(first.path / "summary.json"));

  TempDir second("epic_runner_embed_b");
  ExperimentConfig embedded = parse_config_text(summary["config_text"].get<std::string>());
  embedded.output_dir = second.path.string();
  run_experiment(embedded);
  CHECK(slurp(first.path / "seed_1" / "rewards.csv") ==
        slurp(second.path / "seed_1" / "rewards.csv"));
  CHECK(slurp(first.path / "seed_1" / "bounds.csv") ==
        slurp(second.path / "seed_1" / "bounds.csv"));
}

TEST_CASE("environment variable overrides the output directory") {
  TempDir ignored("epic_runner_env_a");
  TempDir overridden("epic_runner_env_b");
  ExperimentConfig cfg = tiny_config(ignored.path.string());
  setenv("EPIC_OUTPUT_DIR", overridden.path.c_str(), 1);
  const std::string used = run_experiment(cfg);
  unsetenv("EPIC_OUTPUT_DIR");
  CHECK(used == overridden.path.string());
  CHECK(fs::exists(overridden.path / "summary.json"));
  CHECK_FALSE(fs::exists(ignored.path / "summary.json"));
}

TEST_CASE("ablation writes one arm per value plus a sweep summary") {
  TempDir tmp("epic_runner_sweep");
  ExperimentConfig cfg = tiny_config(tmp.path.string());
  cfg.seeds = {1};
  cfg.sweep_kappa = {0.0, 1.0};
  run_ablation(cfg, "kappa");
  CHECK(fs::exists(tmp.path / "kappa_0" / "summary.json"));
  CHECK(fs::exists(tmp.path / "kappa_1" / "summary.json"));
  const std::string sweep = slurp(tmp.path / "sweep_summary.csv");
  CHECK(sweep.find("sweep,value,final_window_mean,final_window_std") == 0);
  CHECK(sweep.find("kappa,0,") != std::string::npos);
  CHECK(sweep.find("kappa,1,") != std::string::npos);

  CHECK_THROWS(run_ablation(cfg, "horizon"));
}

TEST_CASE("cli exit codes: 0 ok, 2 malformed config") {
  TempDir tmp("epic_runner_cli");
  const fs::path good = tmp.path / "good.cfg";
  const fs::path bad = tmp.path / "bad.cfg";
  fs::create_directories(tmp.path);
  {
    std::ofstream out(good);
    out << "[env]\nname = chain_suite\n[algo]\nK = 4\nN = 4\nM = 2\n[run]\nseeds = 1\n"
        << "output_dir = " << (tmp.path / "out").string() << "\n";
  }
  {
    std::ofstream out(bad);
    out << "[algo]\nmystery_key = 1\n";
  }

  const std::string good_path = good.string();
  const std::string bad_path = bad.string();
  {
    const char* argv[] = {"epic_cli", "run", good_path.c_str()};
    CHECK(cli_main(3, const_cast<char**>(argv)) == 0);
    CHECK(fs::exists(tmp.path / "out" / "summary.json"));
  }
  {
    const char* argv[] = {"epic_cli", "run", bad_path.c_str()};
    CHECK(cli_main(3, const_cast<char**>(argv)) == 2);
  }
  {
    const char* argv[] = {"epic_cli", "run", "/nonexistent/nope.cfg"};
    CHECK(cli_main(3, const_cast<char**>(argv)) == 2);
  }
}

TEST_CASE("verification writes martingale and gap rows") {
  TempDir tmp("epic_runner_verify");
  ExperimentConfig cfg = tiny_config(tmp.path.string());
  cfg.seeds = {1};
  cfg.verify_traces = 5;
  cfg.verify_T = 3;
  cfg.verify_N = 2;
  cfg.holdout = 10;
  run_verification(cfg);
  const std::string text = slurp(tmp.path / "verify.csv");
  CHECK(text.find("kind,index,s_t,bound_az,bound_fr,d_abs_max,expected_loss,expected_loss_se,"
                  "training_error,gap,theorem1_bound,theorem1_bound_proof_delta,"
                  "training_regularizer") == 0);
  CHECK(text.find("martingale,0,") != std::string::npos);
  CHECK(text.find("martingale,4,") != std::string::npos);
  CHECK(text.find("gap,0,") != std::string::npos);
}
