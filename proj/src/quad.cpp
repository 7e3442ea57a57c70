#include "epic/quad.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace epic {

QuadratureRule gauss_hermite(int points) {
  if (points < 1) throw std::invalid_argument("gauss_hermite: need at least one point");
  // Golub-Welsch on the Hermite three-term recurrence: off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
  for (int k = 1; k < points; ++k) {
    const double off = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(points);
  const double mu0 = std::sqrt(std::numbers::pi);  // integral of exp(-x^2)
  for (int k = 0; k < points; ++k) {
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

namespace {

template <typename Accumulate>
void tensor_sweep(const GaussianPolicyDistribution& dist, const QuadratureRule& rule,
                  Accumulate&& accumulate) {
  const int dim = dist.dim();
  const int points = static_cast<int>(rule.nodes.size());
  const double norm = std::pow(std::numbers::inv_sqrtpi, dim);
  std::vector<int> idx(dim, 0);
  Eigen::VectorXd theta(dim);
  const double sqrt2 = std::numbers::sqrt2;
  while (true) {
    double w = norm;
    for (int i = 0; i < dim; ++i) {
      theta[i] = dist.mu[i] + sqrt2 * dist.sigma[i] * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    accumulate(w, theta);
    int i = 0;
    for (; i < dim; ++i) {
      if (++idx[i] < points) break;
      idx[i] = 0;
    }
    if (i == dim) break;
  }
}

}  // namespace

double gaussian_expectation(const GaussianPolicyDistribution& dist, int points_per_dim,
                            const std::function<double(const Eigen::VectorXd&)>& f) {
  const QuadratureRule rule = gauss_hermite(points_per_dim);
  double total = 0.0;
  tensor_sweep(dist, rule, [&](double w, const Eigen::VectorXd& theta) { total += w * f(theta); });
  return total;
}

Eigen::VectorXd gaussian_expectation_vec(
    const GaussianPolicyDistribution& dist, int points_per_dim, int out_dim,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
  const QuadratureRule rule = gauss_hermite(points_per_dim);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(out_dim);
  tensor_sweep(dist, rule, [&](double w, const Eigen::VectorXd& theta) { total += w * f(theta); });
  return total;
}

}  // namespace epic
