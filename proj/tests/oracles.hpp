#pragma once

// Test-side oracles: quadrature evaluation of the full EPICG objective and its
// analytic gradient, plus central finite differences. Independent of the
// Monte-Carlo path they are used to check.

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <vector>

#include "epic/envs.hpp"
#include "epic/pacbayes.hpp"
#include "epic/quad.hpp"

namespace epic::testing {

struct Objective {
  double value = 0.0;
  Eigen::VectorXd g_mu;
  Eigen::VectorXd g_log_sigma;
};

// F(mu, log sigma) = E_{theta ~ N(mu, sigma^2)}[ -sum_i J_i(theta) ] + R(KL);
// the return term sums over the window's tasks, matching the update.
inline double objective_value(const GaussianPolicyDistribution& posterior,
                              const GaussianPolicyDistribution& prior,
                              const RegularizerConfig& cfg, const std::vector<ParamMdp>& tasks,
                              const std::shared_ptr<const FeatureMap>& features, int points) {
  const double loss = gaussian_expectation(posterior, points, [&](const Eigen::VectorXd& theta) {
    double total = 0.0;
    for (const auto& task : tasks)
      total += -exact_expected_return(task, GibbsLinearPolicy(theta, features));
    return total;
  });
  return loss +
         cfg.N * training_regularizer(kl_diag_gaussian(posterior, prior), cfg);
}

// Analytic gradient: quadrature over the exact per-theta policy gradient
// chained through the reparameterization, plus the closed-form KL slope.
inline Objective objective_gradient(const GaussianPolicyDistribution& posterior,
                                    const GaussianPolicyDistribution& prior,
                                    const RegularizerConfig& cfg, const std::vector<ParamMdp>& tasks,
                                    const std::shared_ptr<const FeatureMap>& features, int points) {
  const int d = posterior.dim();
  Objective out;
  out.value = objective_value(posterior, prior, cfg, tasks, features, points);

  auto loss_grad = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (const auto& task : tasks)
      g += -exact_return_gradient(task, GibbsLinearPolicy(theta, features));
    return g;
  };

  out.g_mu = gaussian_expectation_vec(posterior, points, d, loss_grad);
  out.g_log_sigma = gaussian_expectation_vec(posterior, points, d, [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eps =
        (theta - posterior.mu).cwiseQuotient(posterior.sigma);
    return Eigen::VectorXd(loss_grad(theta).cwiseProduct(eps).cwiseProduct(posterior.sigma));
  });

  const double kl = kl_diag_gaussian(posterior, prior);
  const double slope = cfg.N * training_regularizer_grad(kl, cfg);
  for (int i = 0; i < d; ++i) {
    const double ps2 = prior.sigma[i] * prior.sigma[i];
    out.g_mu[i] += slope * (posterior.mu[i] - prior.mu[i]) / ps2;
    out.g_log_sigma[i] += slope * (posterior.sigma[i] * posterior.sigma[i] / ps2 - 1.0);
  }
  return out;
}

// Central finite differences of F over (mu, log sigma).
inline Objective objective_fd(const GaussianPolicyDistribution& posterior,
                              const GaussianPolicyDistribution& prior, const RegularizerConfig& cfg,
                              const std::vector<ParamMdp>& tasks,
                              const std::shared_ptr<const FeatureMap>& features, int points,
                              double h = 1e-5) {
  const int d = posterior.dim();
  Objective out;
  out.value = objective_value(posterior, prior, cfg, tasks, features, points);
  out.g_mu.resize(d);
  out.g_log_sigma.resize(d);
  for (int i = 0; i < d; ++i) {
    GaussianPolicyDistribution up = posterior, down = posterior;
    up.mu[i] += h;
    down.mu[i] -= h;
    out.g_mu[i] = (objective_value(up, prior, cfg, tasks, features, points) -
                   objective_value(down, prior, cfg, tasks, features, points)) /
                  (2 * h);
    up = posterior;
    down = posterior;
    up.sigma[i] *= std::exp(h);
    down.sigma[i] *= std::exp(-h);
    out.g_log_sigma[i] = (objective_value(up, prior, cfg, tasks, features, points) -
                          objective_value(down, prior, cfg, tasks, features, points)) /
                         (2 * h);
  }
  return out;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace epic::testing
