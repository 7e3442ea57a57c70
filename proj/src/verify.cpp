#include "epic/verify.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace epic {

double MartingaleTrace::d_abs_max() const {
  double m = 0.0;
  for (double v : d) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// Freedman envelope swept over the proof's geometric lambda grid (base
// sqrt(2)), constrained to lambda <= 1/b with b = N H.
double freedman_envelope(double variance_total, double delta, int T, double b) {
  const double log_term = std::log(2.0 / delta);
  const double lambda_max = 1.0 / b;
  double lambda = lambda_max * std::sqrt(log_term / T);
  double best = std::numeric_limits<double>::infinity();
  while (lambda <= lambda_max * (1.0 + 1e-12)) {
    best = std::min(best, log_term / lambda + lambda * variance_total);
    lambda *= std::numbers::sqrt2;
  }
  best = std::min(best, log_term / lambda_max + lambda_max * variance_total);
  return best;
}

}  // namespace

MartingaleTrace simulate_martingale(const TaskDistribution& chain_stream,
                                    const std::shared_ptr<const FeatureMap>& features,
                                    const std::vector<GaussianPolicyDistribution>& p_sequence,
                                    int T, int N, double delta, std::uint64_t seed) {
  if (chain_stream.family != TaskFamily::kChain)
    throw std::invalid_argument("simulate_martingale: tabular tasks required");
  if (T < 1 || N < 1) throw std::invalid_argument("simulate_martingale: T, N must be positive");
  if (static_cast<int>(p_sequence.size()) < T)
    throw std::invalid_argument("simulate_martingale: need a distribution per window");

  const int H = chain_stream.horizon;
  MartingaleTrace trace;
  trace.d.reserve(T);
  trace.s.reserve(T);
  double prefix = 0.0;
  for (int l = 1; l <= T; ++l) {
    const NoiseDraw noise =
        NoiseDraw::make(seed, static_cast<std::uint64_t>(l), p_sequence[l - 1].dim());
    const Eigen::VectorXd theta = sample_theta(p_sequence[l - 1], noise);
    const GibbsLinearPolicy policy(theta, features);
    double d_l = 0.0;
    for (int i = 1; i <= N; ++i) {
      const ParamMdp task = sample_task(chain_stream, derive_seed(seed, stream::kTask, l, i));
      const double expected = exact_expected_return(task, policy);
      const double realized =
          rollout(task, policy, derive_seed(seed, stream::kRollout, l, i)).return_discounted;
      d_l += expected - realized;
      trace.tilde_s += exact_return_variance(task, policy);
    }
    if (std::abs(d_l) > static_cast<double>(N) * H)
      throw std::logic_error("simulate_martingale: |D_l| exceeded N*H");
    trace.d.push_back(d_l);
    prefix += d_l;
    trace.s.push_back(prefix);
  }

  const double nh = static_cast<double>(N) * H;
  const double worst_variance = static_cast<double>(T) * nh * nh;
  trace.bound_az = std::sqrt(0.5 * std::log(2.0 / delta) * worst_variance);
  trace.bound_fr = freedman_envelope(worst_variance, delta, T, nh);
  trace.bound_fr_emp = freedman_envelope(trace.tilde_s, delta, T, nh);
  return trace;
}

GapReport gap_report(const RunLog& run, const TaskDistribution& stream,
                     const RegularizerConfig& cfg, int holdout_tasks, std::uint64_t seed) {
  if (holdout_tasks < 1) throw std::invalid_argument("gap_report: holdout_tasks must be >= 1");
  if (run.final_posterior.dim() == 0)
    throw std::invalid_argument("gap_report: run has no final posterior");

  const auto features = stream.default_features();
  const bool tabular = stream.family == TaskFamily::kChain;
  constexpr int kThetaDraws = 8;

  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < holdout_tasks; ++t) {
    const ParamMdp task = sample_task(stream, derive_seed(seed, stream::kHoldout, t));
    double task_loss = 0.0;
    for (int j = 0; j < kThetaDraws; ++j) {
      const NoiseDraw noise = NoiseDraw::make(derive_seed(seed, stream::kHoldout, t, 1), j,
                                              run.final_posterior.dim());
      const GibbsLinearPolicy policy(sample_theta(run.final_posterior, noise), features);
      if (tabular) {
        task_loss += -exact_expected_return(task, policy);
      } else {
        task_loss +=
            -rollout(task, policy, derive_seed(seed, stream::kRollout, t, j)).return_discounted;
      }
    }
    task_loss /= kThetaDraws;
    sum += task_loss;
    sum_sq += task_loss * task_loss;
  }

  GapReport report;
  report.holdout_tasks = holdout_tasks;
  report.expected_loss = sum / holdout_tasks;
  const double var =
      holdout_tasks > 1
          ? std::max(0.0, (sum_sq - sum * sum / holdout_tasks) / (holdout_tasks - 1))
          : 0.0;
  report.expected_loss_se = std::sqrt(var / holdout_tasks);
  report.training_error = run.training_error();
  report.gap = report.expected_loss - report.training_error;
  report.bound = theorem1_bound(cfg);
  report.bound_proof_delta = theorem1_bound_proof_delta(cfg);
  const double final_kl = kl_diag_gaussian(run.final_posterior, run.final_prior);
  report.regularizer = training_regularizer(final_kl, cfg);
  return report;
}

}  // namespace epic
