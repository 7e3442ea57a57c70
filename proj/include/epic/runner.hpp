#pragma once

#include <string>

#include "epic/config.hpp"

namespace epic {

// Thrown when a seed's execution fails; run() maps it to exit code 1.
class SeedFailure : public std::runtime_error {
 public:
  SeedFailure(std::uint64_t seed, const std::string& message)
      : std::runtime_error("seed " + std::to_string(seed) + ": " + message), seed_(seed) {}
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// Executes the configured algorithm once per seed; writes rewards.csv,
// bounds.csv and snapshots.json per seed plus summary.json at the top level.
// Returns the output directory actually used (EPIC_OUTPUT_DIR overrides).
std::string run_experiment(const ExperimentConfig& cfg);

// Grid over one hyperparameter; one sub-directory per value plus
// sweep_summary.csv. sweep must be one of kappa | N | lambda0.
std::string run_ablation(const ExperimentConfig& cfg, const std::string& sweep);

// Martingale traces and per-seed gap reports, written to verify.csv.
std::string run_verification(const ExperimentConfig& cfg);

// CLI entry point; returns the process exit code (0 ok, 2 config, 1 runtime).
int cli_main(int argc, char** argv);

}  // namespace epic
