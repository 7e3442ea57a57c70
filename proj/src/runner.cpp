#include "epic/runner.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "epic/csvio.hpp"
#include "epic/verify.hpp"

namespace epic {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolved_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("EPIC_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

std::vector<std::string> reward_header(const TaskDistribution& stream) {
  std::vector<std::string> header = {"task_index"};
  if (stream.family == TaskFamily::kCartPole) {
    header.insert(header.end(), {"cart_mass", "pole_mass", "pole_length"});
  } else {
    header.insert(header.end(), {"slip", "reward_scale"});
  }
  header.insert(header.end(), {"reward", "update_index"});
  return header;
}

const std::vector<std::string> kBoundsHeader = {
    "update_index", "kl_step",       "kl_running_sum", "kl_budget",
    "training_regularizer", "theorem1_bound", "r_hat",          "s_min_hat"};

RunLog execute_algo(const ExperimentConfig& cfg, std::uint64_t seed) {
  const TaskDistribution stream = cfg.make_stream();
  const RegularizerConfig reg = cfg.make_regularizer();
  const TrainingConfig train = cfg.make_training();
  if (cfg.policy == "mlp") {
    if (cfg.algo == "epicg") return run_lifelong_mlp(stream, cfg.hidden, reg, train, seed);
    if (cfg.algo == "epicg_ft") return epicg_ft_mlp(stream, cfg.hidden, reg, train, seed);
    if (cfg.algo == "single_task")
      return single_task_baseline_mlp(stream, cfg.hidden, reg, train, seed);
  } else {
    if (cfg.algo == "epicg") return run_lifelong(stream, reg, train, seed);
    if (cfg.algo == "epicg_ft") return epicg_ft(stream, reg, train, seed);
    if (cfg.algo == "single_task") return single_task_baseline(stream, reg, train, seed);
  }
  throw std::runtime_error("unknown algo: " + cfg.algo);
}

void write_seed_outputs(const ExperimentConfig& cfg, const fs::path& dir, const RunLog& log) {
  const TaskDistribution stream = cfg.make_stream();
  fs::create_directories(dir);

  CsvWriter rewards((dir / "rewards.csv").string(), reward_header(stream));
  for (const auto& t : log.tasks) {
    rewards.begin_row();
    rewards.add(t.task_index);
    for (const auto& [name, value] : t.params) rewards.add(value);
    rewards.add(t.reward);
    rewards.add(t.update_index);
    rewards.end_row();
  }

  CsvWriter bounds((dir / "bounds.csv").string(), kBoundsHeader);
  for (const auto& u : log.updates) {
    bounds.begin_row();
    bounds.add(u.update_index);
    bounds.add(u.kl_step);
    bounds.add(u.kl_running_sum);
    bounds.add(u.kl_budget_ceiling);
    bounds.add(u.regularizer_value);
    bounds.add(u.bound_value);
    bounds.add(u.r_hat_step);
    bounds.add(u.s_min_hat);
    bounds.end_row();
  }

  json snapshots = json::array();
  for (std::size_t l = 0; l < log.snapshots.size(); ++l) {
    snapshots.push_back(
        {{"update_index", l + 1}, {"posterior", gaussian_to_json(log.snapshots[l])}});
  }
  std::ofstream snap((dir / "snapshots.json").string(), std::ios::binary);
  snap << snapshots.dump(2) << "\n";
}

struct SeedSummary {
  std::uint64_t seed;
  double final_window_mean;
  double overall_mean;
  double training_error;
  double final_kl;
};

json summarize_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunLog& log,
                    SeedSummary* out) {
  const int first = std::max(1, cfg.K - cfg.N + 1);
  SeedSummary s;
  s.seed = seed;
  s.final_window_mean = log.mean_reward_over(first, cfg.K);
  s.overall_mean = log.mean_reward_over(1, cfg.K);
  s.training_error = log.training_error();
  s.final_kl = log.final_posterior.dim() > 0 && log.final_prior.dim() > 0
                   ? kl_diag_gaussian(log.final_posterior, log.final_prior)
                   : 0.0;
  if (out) *out = s;
  json j;
  j["seed"] = seed;
  j["final_window_mean"] = s.final_window_mean;
  j["overall_mean"] = s.overall_mean;
  j["training_error"] = s.training_error;
  j["final_kl"] = s.final_kl;
  if (!log.updates.empty()) {
    const auto& last = log.updates.back();
    j["theorem1_bound"] = last.bound_value;
    j["kl_running_sum"] = last.kl_running_sum;
    j["kl_budget"] = last.kl_budget_ceiling;
  }
  if (log.snapshots.size() >= 2 && cfg.policy == "linear") {
    const TaskDistribution stream = cfg.make_stream();
    const auto estimate = estimate_assumption_constants(
        log.snapshots, *stream.default_features(), stream.probe_states());
    j["r_hat"] = estimate.r_hat;
    j["s_min_hat"] = estimate.s_min_hat;
  }
  return j;
}

// Runs every seed (concurrently), writes per-seed files, returns summaries.
std::vector<std::pair<SeedSummary, json>> run_all_seeds(const ExperimentConfig& cfg,
                                                        const fs::path& out_dir) {
  std::vector<std::future<std::pair<SeedSummary, json>>> futures;
  for (const std::uint64_t seed : cfg.seeds) {
    futures.push_back(std::async(std::launch::async, [&cfg, &out_dir, seed] {
      try {
        const RunLog log = execute_algo(cfg, seed);
        write_seed_outputs(cfg, out_dir / ("seed_" + std::to_string(seed)), log);
        SeedSummary s;
        json j = summarize_seed(cfg, seed, log, &s);
        return std::make_pair(s, j);
      } catch (const std::exception& e) {
        throw SeedFailure(seed, e.what());
      }
    }));
  }
  std::vector<std::pair<SeedSummary, json>> results;
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

json aggregate_summary(const ExperimentConfig& cfg,
                       const std::vector<std::pair<SeedSummary, json>>& results) {
  json j;
  j["algo"] = cfg.algo;
  j["env"] = cfg.env_name;
  j["config_text"] = serialize_config(cfg);
  json per_seed = json::array();
  double mean = 0.0;
  for (const auto& [s, sj] : results) {
    per_seed.push_back(sj);
    mean += s.final_window_mean;
  }
  mean /= results.size();
  double var = 0.0;
  for (const auto& [s, sj] : results) {
    var += (s.final_window_mean - mean) * (s.final_window_mean - mean);
  }
  var = results.size() > 1 ? var / (results.size() - 1) : 0.0;
  j["per_seed"] = per_seed;
  j["final_window_mean"] = mean;
  j["final_window_std"] = std::sqrt(var);
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path.string(), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out_dir = resolved_output_dir(cfg);
  fs::create_directories(out_dir);
  const auto results = run_all_seeds(cfg, out_dir);
  write_json(out_dir / "summary.json", aggregate_summary(cfg, results));
  return out_dir.string();
}

std::string run_ablation(const ExperimentConfig& cfg, const std::string& sweep) {
  cfg.validate();
  const fs::path out_dir = resolved_output_dir(cfg);
  fs::create_directories(out_dir);

  struct Arm {
    std::string label;
    ExperimentConfig config;
  };
  std::vector<Arm> arms;
  if (sweep == "kappa") {
    for (double v : cfg.sweep_kappa) {
      ExperimentConfig c = cfg;
      c.kappa = v;
      arms.push_back({"kappa_" + format_double(v), c});
    }
  } else if (sweep == "N") {
    for (int v : cfg.sweep_N) {
      ExperimentConfig c = cfg;
      c.N = v;
      arms.push_back({"N_" + std::to_string(v), c});
    }
  } else if (sweep == "lambda0") {
    for (double v : cfg.sweep_lambda0) {
      ExperimentConfig c = cfg;
      c.lambda0 = v;
      arms.push_back({"lambda0_" + format_double(v), c});
    }
  } else {
    throw std::runtime_error("unknown sweep: " + sweep + " (expected kappa, N or lambda0)");
  }

  CsvWriter sweep_csv((out_dir / "sweep_summary.csv").string(),
                      {"sweep", "value", "final_window_mean", "final_window_std"});
  for (const auto& arm : arms) {
    const fs::path arm_dir = out_dir / arm.label;
    fs::create_directories(arm_dir);
    const auto results = run_all_seeds(arm.config, arm_dir);
    const json summary = aggregate_summary(arm.config, results);
    write_json(arm_dir / "summary.json", summary);
    sweep_csv.begin_row();
    sweep_csv.add(sweep);
    const std::string& label = arm.label;
    sweep_csv.add(label.substr(label.find('_') + 1));
    sweep_csv.add(summary["final_window_mean"].get<double>());
    sweep_csv.add(summary["final_window_std"].get<double>());
    sweep_csv.end_row();
  }
  return out_dir.string();
}

std::string run_verification(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out_dir = resolved_output_dir(cfg);
  fs::create_directories(out_dir);

  const TaskDistribution stream = cfg.make_stream();
  if (stream.family != TaskFamily::kChain)
    throw std::runtime_error("verify requires a chain environment (tabular oracles)");
  const RegularizerConfig reg = cfg.make_regularizer();
  const TrainingConfig train = cfg.make_training();
  const auto features = stream.default_features();

  CsvWriter verify_csv((out_dir / "verify.csv").string(),
                       {"kind", "index", "s_t", "bound_az", "bound_fr", "d_abs_max",
                        "expected_loss", "expected_loss_se", "training_error", "gap",
                        "theorem1_bound", "theorem1_bound_proof_delta",
                        "training_regularizer"});

  // Posterior sequence for the martingale windows comes from a reference run.
  const RunLog reference = run_lifelong(stream, reg, train, cfg.seeds.front());
  std::vector<GaussianPolicyDistribution> sequence;
  sequence.push_back(make_initial_state(features->dim(), reg, train).posterior);
  for (const auto& snap : reference.snapshots) sequence.push_back(snap);
  while (static_cast<int>(sequence.size()) < cfg.verify_T) sequence.push_back(sequence.back());

  for (int t = 0; t < cfg.verify_traces; ++t) {
    const MartingaleTrace trace =
        simulate_martingale(stream, features, sequence, cfg.verify_T, cfg.verify_N,
                            cfg.verify_delta, derive_seed(cfg.seeds.front(), 0x74726163ULL, t));
    verify_csv.begin_row();
    verify_csv.add(std::string("martingale"));
    verify_csv.add(t);
    verify_csv.add(trace.s_final());
    verify_csv.add(trace.bound_az);
    verify_csv.add(trace.bound_fr);
    verify_csv.add(trace.d_abs_max());
    for (int k = 0; k < 7; ++k) verify_csv.add(std::string());
    verify_csv.end_row();
  }

  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    RegularizerConfig final_cfg = reg;
    final_cfg.K_so_far = cfg.K;
    const RunLog log = run_lifelong(stream, reg, train, cfg.seeds[s]);
    const GapReport report = gap_report(log, stream, final_cfg, cfg.holdout,
                                        derive_seed(cfg.seeds[s], 0x676170ULL));
    verify_csv.begin_row();
    verify_csv.add(std::string("gap"));
    verify_csv.add(static_cast<int>(s));
    for (int k = 0; k < 4; ++k) verify_csv.add(std::string());
    verify_csv.add(report.expected_loss);
    verify_csv.add(report.expected_loss_se);
    verify_csv.add(report.training_error);
    verify_csv.add(report.gap);
    verify_csv.add(report.bound);
    verify_csv.add(report.bound_proof_delta);
    verify_csv.add(report.regularizer);
    verify_csv.end_row();
  }
  return out_dir.string();
}

int cli_main(int argc, char** argv) {
  CLI::App app{"EPIC/EPICG lifelong reinforcement-learning experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string sweep = "kappa";

  CLI::App* run_cmd = app.add_subcommand("run", "run the configured algorithm for every seed");
  run_cmd->add_option("config", config_path, "experiment config file")->required();

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "sweep one hyperparameter");
  ablate_cmd->add_option("config", config_path, "experiment config file")->required();
  ablate_cmd->add_option("--sweep", sweep, "kappa | N | lambda0")->required();

  CLI::App* verify_cmd =
      app.add_subcommand("verify", "martingale traces and generalization-gap reports");
  verify_cmd->add_option("config", config_path, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    std::string out;
    if (run_cmd->parsed()) out = run_experiment(cfg);
    if (ablate_cmd->parsed()) out = run_ablation(cfg, sweep);
    if (verify_cmd->parsed()) out = run_verification(cfg);
    std::cout << "wrote " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace epic
