#include "epic/pacbayes.hpp"

#include <cmath>
#include <stdexcept>

namespace epic {

void RegularizerConfig::validate() const {
  if (N <= 0 || H <= 0) throw std::domain_error("RegularizerConfig: N and H must be positive");
  if (K_so_far < 0) throw std::domain_error("RegularizerConfig: K_so_far must be non-negative");
  if (!(lambda0 > 0.0 && lambda0 < 1.0))
    throw std::domain_error("RegularizerConfig: lambda0 must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("RegularizerConfig: alpha must lie in (0, 1)");
  if (!(delta_conf > 0.0 && delta_conf < 1.0))
    throw std::domain_error("RegularizerConfig: delta_conf must lie in (0, 1)");
  if (!(gamma_exp > 0.0 && gamma_exp < 1.0))
    throw std::domain_error("RegularizerConfig: gamma_exp must lie in (0, 1)");
  if (!(s_min > 0.0) || !(r >= 0.0)) throw std::domain_error("RegularizerConfig: bad s_min or r");
  if (reg_scale < 0.0) throw std::domain_error("RegularizerConfig: reg_scale must be >= 0");
}

double training_regularizer(double kl, const RegularizerConfig& cfg) {
  if (kl < 0.0) throw std::domain_error("training_regularizer: kl must be non-negative");
  const double samples = static_cast<double>(cfg.N) * cfg.H;
  return cfg.reg_scale * std::sqrt((kl + std::log(2.0 * std::sqrt(samples) / cfg.delta_conf)) /
                                   (2.0 * samples));
}

double training_regularizer_grad(double kl, const RegularizerConfig& cfg) {
  if (kl < 0.0) throw std::domain_error("training_regularizer_grad: kl must be non-negative");
  const double samples = static_cast<double>(cfg.N) * cfg.H;
  const double inner = kl + std::log(2.0 * std::sqrt(samples) / cfg.delta_conf);
  return cfg.reg_scale / (2.0 * std::sqrt(inner * 2.0 * samples));
}

double theorem1_bound(const RegularizerConfig& cfg, bool* flagged) {
  cfg.validate();
  if (cfg.K_so_far < cfg.N) throw std::domain_error("theorem1_bound: K must be at least N");
  if (flagged) *flagged = (cfg.K_so_far % cfg.N) != 0;
  const double K = static_cast<double>(cfg.K_so_far);
  const double T = std::floor(K / cfg.N);
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.N));
  const double alpha_pow = std::pow(cfg.alpha, 2.0 * (T - 1.0));
  const double first = 2.0 * sqrt_n * cfg.H * (cfg.lambda0 * cfg.r / (1.0 - cfg.alpha)) *
                       std::sqrt((1.0 - alpha_pow) / (cfg.s_min * (1.0 - cfg.alpha * cfg.alpha))) /
                       std::sqrt(K);
  const double second = 2.0 * sqrt_n * cfg.H / std::pow(K, (1.0 - cfg.gamma_exp) / 2.0);
  return first + second;
}

double theorem1_bound_proof_delta(const RegularizerConfig& cfg) {
  cfg.validate();
  if (cfg.K_so_far < cfg.N)
    throw std::domain_error("theorem1_bound_proof_delta: K must be at least N");
  const double K = static_cast<double>(cfg.K_so_far);
  const double T = std::floor(K / cfg.N);
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.N));
  const double alpha_pow = std::pow(cfg.alpha, 2.0 * (T - 1.0));
  const double first = 2.0 * sqrt_n * cfg.H * (cfg.lambda0 * cfg.r / (1.0 - cfg.alpha)) *
                       std::sqrt((1.0 - alpha_pow) / (cfg.s_min * (1.0 - cfg.alpha * cfg.alpha))) /
                       std::sqrt(K);
  // ln(2/delta) = K cancels the 1/sqrt(K) shrinkage of the second term.
  const double second = 2.0 * sqrt_n * cfg.H;
  return first + second;
}

double kl_budget(const RegularizerConfig& cfg, int T) {
  if (T < 1) throw std::invalid_argument("kl_budget: T must be at least 1");
  const double lead =
      2.0 * cfg.lambda0 * cfg.lambda0 * cfg.r * cfg.r / (cfg.s_min * (1.0 - cfg.alpha) * (1.0 - cfg.alpha));
  const double alpha_pow = std::pow(cfg.alpha, 2.0 * (T - 1.0));
  return lead * (1.0 - alpha_pow) / (1.0 - cfg.alpha * cfg.alpha);
}

std::uint64_t sample_complexity_K(double epsilon, const RegularizerConfig& cfg) {
  if (!(epsilon > 0.0)) throw std::domain_error("sample_complexity_K: epsilon must be positive");
  const double n = cfg.N;
  const double h2 = static_cast<double>(cfg.H) * cfg.H;
  const double eps2 = epsilon * epsilon;
  const double first = 16.0 * n * h2 * cfg.lambda0 * cfg.lambda0 * cfg.r * cfg.r /
                       (cfg.s_min * std::pow(1.0 - cfg.alpha, 3.0) * (1.0 + cfg.alpha) * eps2);
  const double second = std::pow(16.0 * n * h2 / eps2, 1.0 / (1.0 - cfg.gamma_exp));
  return static_cast<std::uint64_t>(std::ceil(std::max(first, second)));
}

AssumptionEstimate estimate_assumption_constants(
    const std::vector<GaussianPolicyDistribution>& history, const FeatureMap& features,
    const std::vector<Eigen::VectorXd>& probe_states) {
  if (history.size() < 2)
    throw std::invalid_argument("estimate_assumption_constants: need at least 2 snapshots");
  AssumptionEstimate est;
  est.r_hat = 0.0;
  for (std::size_t l = 1; l < history.size(); ++l) {
    const double kl = kl_diag_gaussian(history[l], history[l - 1]);
    est.r_hat = std::max(est.r_hat, std::sqrt(kl / 2.0));
  }
  est.s_min_hat = 1.0;
  for (const auto& snapshot : history) {
    const GibbsLinearPolicy policy(snapshot.mu, std::shared_ptr<const FeatureMap>(
                                                    &features, [](const FeatureMap*) {}));
    for (const auto& state : probe_states) {
      const Eigen::VectorXd probs = policy.action_probs(state);
      est.s_min_hat = std::min(est.s_min_hat, probs.minCoeff());
    }
  }
  return est;
}

}  // namespace epic
