#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "epic/envs.hpp"
#include "epic/lifelong.hpp"
#include "epic/pacbayes.hpp"

namespace epic {

// One simulated run of the windowed martingale S_T = sum_l D_l, where D_l is
// the gap between the exact conditional expected value and one realized
// rollout return, summed over the window's N tasks.
struct MartingaleTrace {
  std::vector<double> d;       // D_l
  std::vector<double> s;       // prefix sums
  double bound_az = 0.0;       // sqrt(0.5 ln(2/delta) T N^2 H^2)
  double bound_fr = 0.0;       // Freedman envelope, worst-case variance
  double bound_fr_emp = 0.0;   // Freedman envelope, exact conditional variance
  double tilde_s = 0.0;        // sum_l E[D_l^2 | F_{l-1}], exact
  double s_final() const { return s.empty() ? 0.0 : s.back(); }
  double d_abs_max() const;
};

// Tabular tasks only: the conditional expectation is computed exactly.
MartingaleTrace simulate_martingale(const TaskDistribution& chain_stream,
                                    const std::shared_ptr<const FeatureMap>& features,
                                    const std::vector<GaussianPolicyDistribution>& p_sequence,
                                    int T, int N, double delta, std::uint64_t seed);

struct GapReport {
  double expected_loss = 0.0;
  double expected_loss_se = 0.0;  // Monte-Carlo standard error over holdout tasks
  double training_error = 0.0;
  double gap = 0.0;  // expected_loss - training_error
  double bound = 0.0;              // stated confidence level, exp(-K^gamma)
  double bound_proof_delta = 0.0;  // proof's substitution, exp(-K)
  double regularizer = 0.0;  // training regularizer at the final posterior KL
  int holdout_tasks = 0;
};

// Expected loss of the final posterior on fresh tasks from the same stream.
// Holdout evaluation never touches the training state.
GapReport gap_report(const RunLog& run, const TaskDistribution& stream,
                     const RegularizerConfig& cfg, int holdout_tasks, std::uint64_t seed);

}  // namespace epic
