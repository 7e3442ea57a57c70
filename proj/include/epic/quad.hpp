#pragma once

#include <Eigen/Core>

#include <functional>

#include "epic/policy.hpp"

namespace epic {

// Gauss-Hermite rule for the weight exp(-x^2) on (-inf, inf).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

QuadratureRule gauss_hermite(int points);

// E_{theta ~ N(mu, diag sigma^2)}[f(theta)] by a tensor-product rule; intended
// for dim <= 3.
double gaussian_expectation(const GaussianPolicyDistribution& dist, int points_per_dim,
                            const std::function<double(const Eigen::VectorXd&)>& f);

// Same tensor-product sweep, accumulating a vector-valued integrand.
Eigen::VectorXd gaussian_expectation_vec(const GaussianPolicyDistribution& dist,
                                         int points_per_dim, int out_dim,
                                         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f);

}  // namespace epic
