#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "epic/policy.hpp"

namespace epic {

// All bound constants in one place. gamma_exp is the bound exponent, distinct
// from the MDP discount (gamma_disc lives with the task).
struct RegularizerConfig {
  int N = 25;               // tasks per update window (memory size)
  int H = 100;              // horizon
  int K_so_far = 0;         // tasks seen
  double lambda0 = 0.9;     // initial prior-evolution speed, in (0, 1)
  double alpha = 0.95;      // lambda decay factor, in (0, 1)
  double s_min = 0.01;      // smallest nonzero policy probability (declared)
  double r = 0.05;          // radius of variation (declared)
  double delta_conf = 0.05; // failure probability, in (0, 1)
  double gamma_exp = 0.25;  // bound exponent, in (0, 1)
  double reg_scale = 1.0;   // kappa >= 0 multiplier on the training regularizer

  void validate() const;
};

// McAllester-form training regularizer with sample count N*H:
//   kappa * sqrt((kl + ln(2 sqrt(N H) / delta)) / (2 N H)).
double training_regularizer(double kl, const RegularizerConfig& cfg);
// d/d(kl) of the above, for the analytic gradient path.
double training_regularizer_grad(double kl, const RegularizerConfig& cfg);

// The diagnostic generalization bound evaluated at cfg.K_so_far. When K is not
// divisible by N, T is floored and *flagged is set.
double theorem1_bound(const RegularizerConfig& cfg, bool* flagged = nullptr);

// The same bound under the proof's failure-probability substitution
// (exp(-K) instead of exp(-K^gamma)); the second term loses its K-power
// decay. Reported next to theorem1_bound, never used in its place.
double theorem1_bound_proof_delta(const RegularizerConfig& cfg);

// Ceiling on sum_{l=1}^{T-1} KL(P_l || prior_l).
double kl_budget(const RegularizerConfig& cfg, int T);

// Task count needed for an epsilon-optimal world policy (the additive
// O-tilde(N eps^-4) term is an order note, not part of the value).
std::uint64_t sample_complexity_K(double epsilon, const RegularizerConfig& cfg);

struct AssumptionEstimate {
  double s_min_hat = 0.0;
  double r_hat = 0.0;
};

// Diagnostics for the bound's constants: r_hat is a Pinsker upper proxy on the
// total-variation distance between consecutive snapshots; s_min_hat probes
// induced action probabilities at each snapshot's mean. Logged, never fed back
// into the training regularizer.
AssumptionEstimate estimate_assumption_constants(
    const std::vector<GaussianPolicyDistribution>& history, const FeatureMap& features,
    const std::vector<Eigen::VectorXd>& probe_states);

}  // namespace epic
