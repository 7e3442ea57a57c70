#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epic/lifelong.hpp"
#include "epic/pacbayes.hpp"

namespace epic {

// Thrown on malformed config text; carries the offending line number.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message)
      : std::runtime_error("config line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct ExperimentConfig {
  // [env]
  std::string env_name = "chain_suite";
  int H = 5;
  double discount = 0.9;

  // [algo]
  std::string algo = "epicg";  // epicg | epicg_ft | single_task
  std::string policy = "linear";  // linear | mlp (opt-in)
  std::vector<int> hidden = {8};  // hidden layer sizes for policy = mlp
  int K = 200;
  int N = 25;
  int M = 5;
  double beta = 1e-4;
  double lambda0 = 0.9;
  double alpha = 0.95;
  double kappa = 1.0;
  double delta_conf = 0.05;
  double gamma_exp = 0.25;
  int inner_steps = 0;
  int inner_batch = 4;
  double inner_beta = 0.1;
  int eval_rollouts = 1;
  double sigma_init = 0.1;
  double s_min = 0.01;
  double r = 0.05;

  // [run]
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "out";

  // [sweep]
  std::vector<double> sweep_kappa = {0.0, 1.0};
  std::vector<int> sweep_N = {5, 10, 25, 50};
  std::vector<double> sweep_lambda0 = {0.84, 0.86, 0.88, 0.90, 0.92, 0.94};

  // [verify]
  int verify_traces = 1000;
  int verify_T = 20;
  int verify_N = 2;
  double verify_delta = 0.1;
  int holdout = 200;

  TaskDistribution make_stream() const;
  RegularizerConfig make_regularizer() const;
  TrainingConfig make_training() const;

  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical round-trippable text form (all fields resolved).
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace epic
