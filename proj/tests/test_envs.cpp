#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "epic/envs.hpp"

using namespace epic;

namespace {

Eigen::VectorXd state1(double s) {
  Eigen::VectorXd v(1);
  v[0] = s;
  return v;
}

// 1 state, 2 actions, both self-loop; rewards (r0, r1).
ParamMdp bandit(double r0, double r1, int horizon = 1, double discount = 0.9) {
  ChainParams p;
  p.num_states = 1;
  p.num_actions = 2;
  p.transition = {1.0, 1.0};
  p.reward = {r0, r1};
  return ParamMdp::chain(p, horizon, discount);
}

// 2 states; action a goes to state a; reward 1 in state 0, else 0.
ParamMdp two_state_switch(int horizon, double discount = 0.9) {
  ChainParams p;
  p.num_states = 2;
  p.num_actions = 2;
  p.transition = {
      1, 0,  // s0 a0
      0, 1,  // s0 a1
      1, 0,  // s1 a0
      0, 1,  // s1 a1
  };
  p.reward = {1, 1, 0, 0};
  return ParamMdp::chain(p, horizon, discount);
}

}  // namespace

TEST_CASE("chain construction validates rows and rewards") {
  ChainParams p;
  p.num_states = 2;
  p.num_actions = 1;
  p.transition = {0.5, 0.4, 0.0, 1.0};  // first row sums to 0.9
  p.reward = {0.5, 0.5};
  CHECK_THROWS_AS(ParamMdp::chain(p, 5, 0.9), std::domain_error);
  p.transition = {0.5, 0.5, 0.0, 1.0};
  p.reward = {1.5, 0.5};  // outside [0, 1]
  CHECK_THROWS_AS(ParamMdp::chain(p, 5, 0.9), std::domain_error);
  p.reward = {1.0, 0.5};
  CHECK_NOTHROW(ParamMdp::chain(p, 5, 0.9));
}

TEST_CASE("chain step is a tabular lookup") {
  const ParamMdp mdp = bandit(1.0, 0.0, 5);
  Rng rng(1);
  const auto result = mdp.step(state1(0), 0, rng);
  CHECK(result.next_state[0] == 0.0);
  CHECK(result.reward == 1.0);
  CHECK_FALSE(result.done);
  CHECK_THROWS_AS(mdp.step(state1(0), 7, rng), std::domain_error);
}

TEST_CASE("cart-pole pushes right when forced right") {
  const ParamMdp mdp = ParamMdp::cart_pole({1.0, 0.1, 0.5}, 100, 0.99);
  Rng rng(1);
  const auto result = mdp.step(Eigen::VectorXd::Zero(4), 1, rng);
  CHECK(result.next_state[1] > 0.0);
  CHECK_FALSE(result.done);
}

TEST_CASE("cart-pole params must be positive") {
  CHECK_THROWS_AS(ParamMdp::cart_pole({0.0, 0.1, 0.5}, 100, 0.99), std::domain_error);
  CHECK_THROWS_AS(ParamMdp::cart_pole({1.0, -0.1, 0.5}, 100, 0.99), std::domain_error);
}

TEST_CASE("cart-pole euler tracks an RK4 oracle within 5%") {
  const CartPoleParams params{1.0, 0.1, 0.5};
  const ParamMdp mdp = ParamMdp::cart_pole(params, 1000, 0.99);
  Rng rng(1);

  Eigen::VectorXd state = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < 50; ++i) state = mdp.step(state, 1, rng).next_state;

  // Independent RK4 integration of the same dynamics under constant force.
  const double force = 10.0;
  const double total_mass = params.cart_mass + params.pole_mass;
  const double half_length = params.pole_length / 2.0;
  const double pml = params.pole_mass * half_length;
  auto deriv = [&](const Eigen::Vector4d& y) {
    const double theta = y[2], theta_dot = y[3];
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double temp = (force + pml * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (9.8 * sin_t - cos_t * temp) /
        (half_length * (4.0 / 3.0 - params.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pml * theta_acc * cos_t / total_mass;
    return Eigen::Vector4d(y[1], x_acc, y[3], theta_acc);
  };
  Eigen::Vector4d y = Eigen::Vector4d::Zero();
  const double dt = 0.02;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector4d k1 = deriv(y);
    const Eigen::Vector4d k2 = deriv(y + 0.5 * dt * k1);
    const Eigen::Vector4d k3 = deriv(y + 0.5 * dt * k2);
    const Eigen::Vector4d k4 = deriv(y + dt * k3);
    y += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  CHECK(std::abs(state[2] - y[2]) / std::abs(y[2]) < 0.05);
}

TEST_CASE("rollout return is the discounted geometric series") {
  const ParamMdp mdp = bandit(1.0, 1.0, 11);  // reward 1 every step
  auto features = std::make_shared<TabularFeatures>(1, 2);
  const GibbsLinearPolicy policy(Eigen::VectorXd::Zero(2), features);
  const Trajectory traj = rollout(mdp, policy, 99);
  CHECK(traj.steps.size() == 10);
  CHECK(traj.return_discounted == doctest::Approx(6.513215599).epsilon(1e-12));

  // Recomputing the discounted return from the steps reproduces the field.
  double recomputed = 0.0;
  double pow = 1.0;
  for (const auto& s : traj.steps) {
    recomputed += pow * s.reward;
    pow *= mdp.discount();
  }
  CHECK(std::abs(recomputed - traj.return_discounted) < 1e-10);
}

TEST_CASE("deterministic policy on a deterministic chain ignores the seed") {
  const ParamMdp mdp = two_state_switch(6);
  auto features = std::make_shared<TabularFeatures>(2, 2);
  Eigen::VectorXd theta(4);
  theta << 1e4, -1e4, 1e4, -1e4;  // softmax underflows to exactly (1, 0)
  const GibbsLinearPolicy policy(theta, features);
  const Trajectory a = rollout(mdp, policy, 1);
  const Trajectory b = rollout(mdp, policy, 2);
  REQUIRE(a.steps.size() == b.steps.size());
  CHECK(a.return_discounted == b.return_discounted);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].action == b.steps[i].action);
    CHECK(a.steps[i].state == b.steps[i].state);
  }
  // And the exact evaluator agrees with the realized return exactly.
  CHECK(exact_expected_return(mdp, policy) == doctest::Approx(a.return_discounted).epsilon(1e-14));
}

TEST_CASE("exact expected return matches the hand enumeration") {
  const ParamMdp mdp = two_state_switch(3);
  auto features = std::make_shared<TabularFeatures>(2, 2);
  const GibbsLinearPolicy uniform(Eigen::VectorXd::Zero(4), features);
  CHECK(exact_expected_return(mdp, uniform) == doctest::Approx(1.45).epsilon(1e-14));
  CHECK_THROWS_AS(exact_expected_return(ParamMdp::cart_pole({1, 0.1, 0.5}, 10, 0.99), uniform),
                  std::invalid_argument);
}

TEST_CASE("exact return lies inside the reward bounds") {
  auto features = std::make_shared<TabularFeatures>(3, 2);
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const ParamMdp mdp =
        make_chain_task(0.3 * rng.uniform(), 0.5 + 0.5 * rng.uniform(), 5, 0.9);
    Eigen::VectorXd theta(6);
    for (int i = 0; i < 6; ++i) theta[i] = rng.normal();
    const GibbsLinearPolicy policy(theta, features);
    const double value = exact_expected_return(mdp, policy);
    const double ceiling = (1.0 - std::pow(0.9, mdp.max_steps())) / (1.0 - 0.9);
    CHECK(value >= 0.0);
    CHECK(value <= ceiling + 1e-12);
  }
}

TEST_CASE("monte-carlo rollouts agree with the exact evaluator") {
  const ParamMdp mdp = two_state_switch(5);
  auto features = std::make_shared<TabularFeatures>(2, 2);
  const GibbsLinearPolicy uniform(Eigen::VectorXd::Zero(4), features);
  const double exact = exact_expected_return(mdp, uniform);
  const double variance = exact_return_variance(mdp, uniform);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rollout(mdp, uniform, 1000 + i).return_discounted;
  const double mc = sum / n;
  CHECK(std::abs(mc - exact) / exact < 0.01);
  CHECK(std::abs(mc - exact) < 3.0 * std::sqrt(variance / n));
}

TEST_CASE("exact return gradient matches finite differences") {
  const ParamMdp mdp = make_chain_task(0.1, 1.0, 5, 0.9);
  auto features = std::make_shared<TabularFeatures>(3, 2);
  Rng rng(23);
  Eigen::VectorXd theta(6);
  for (int i = 0; i < 6; ++i) theta[i] = 0.5 * rng.normal();
  const Eigen::VectorXd grad = exact_return_gradient(mdp, GibbsLinearPolicy(theta, features));
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up[i] += h;
    down[i] -= h;
    const double fd = (exact_expected_return(mdp, GibbsLinearPolicy(up, features)) -
                       exact_expected_return(mdp, GibbsLinearPolicy(down, features))) /
                      (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("exact return variance matches empirical variance") {
  const ParamMdp mdp = make_chain_task(0.2, 1.0, 5, 0.9);
  auto features = std::make_shared<TabularFeatures>(3, 2);
  const GibbsLinearPolicy uniform(Eigen::VectorXd::Zero(6), features);
  const double exact_var = exact_return_variance(mdp, uniform);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rollout(mdp, uniform, 5000 + i).return_discounted;
    sum += g;
    sq += g * g;
  }
  const double emp_var = sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(emp_var - exact_var) / exact_var < 0.05);
}

TEST_CASE("task sampling respects supports and degenerate mixtures") {
  const TaskDistribution uniform = TaskDistribution::cartpole_uniform();
  for (int i = 0; i < 200; ++i) {
    const ParamMdp task = sample_task(uniform, i);
    const auto& p = task.cart_pole_params();
    CHECK(p.cart_mass >= 1.0);
    CHECK(p.cart_mass <= 5.0);
    CHECK(p.pole_mass >= 0.1);
    CHECK(p.pole_mass <= 0.5);
    CHECK(p.pole_length >= 0.3);
    CHECK(p.pole_length <= 0.7);
  }

  MixtureComponent degenerate;
  degenerate.weight = 1.0;
  degenerate.params = {{"cart_mass", ParamDist::categorical({3.0}, {1.0})},
                       {"pole_mass", ParamDist::categorical({0.1}, {1.0})},
                       {"pole_length", ParamDist::categorical({0.5}, {1.0})}};
  const TaskDistribution point(TaskFamily::kCartPole, 100, 0.99, {degenerate});
  for (int i = 0; i < 10; ++i)
    CHECK(sample_task(point, i).cart_pole_params().cart_mass == 3.0);
}

TEST_CASE("task sampling is deterministic per seed") {
  const TaskDistribution gmm = TaskDistribution::cartpole_gmm();
  const ParamMdp a = sample_task(gmm, 1234);
  const ParamMdp b = sample_task(gmm, 1234);
  CHECK(a.cart_pole_params().cart_mass == b.cart_pole_params().cart_mass);
  CHECK(a.content_hash() == b.content_hash());
  const ParamMdp c = sample_task(gmm, 1235);
  CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("gmm marginals match the declared weights (chi-square)") {
  const TaskDistribution gmm = TaskDistribution::cartpole_gmm();
  const std::vector<double> centers = {1.0, 5.0, 2.0, 4.0, 3.0};
  const std::vector<double> weights = {0.15, 0.15, 0.18, 0.18, 0.34};
  const int n = 10000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) {
    const double mass = sample_task(gmm, i).cart_pole_params().cart_mass;
    int best = 0;
    for (int k = 1; k < 5; ++k)
      if (std::abs(mass - centers[k]) < std::abs(mass - centers[best])) best = k;
    counts[best]++;
  }
  double chi2 = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double expected = n * weights[k];
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  CHECK(chi2 < 13.276704135987622);  // 0.99 quantile, 4 dof
}

TEST_CASE("out-of-support normal draws are resampled then clamped") {
  // Mean far outside the support: all 100 resamples miss, so the sample is
  // the clamped mean.
  const ParamDist far = ParamDist::normal(10.0, 0.1, 0.0, 1.0);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) CHECK(far.sample(rng) == 1.0);

  // Support-straddling normal never escapes the declared interval.
  const ParamDist edge = ParamDist::normal(0.0, 1.0, -0.5, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const double v = edge.sample(rng);
    CHECK(v >= -0.5);
    CHECK(v <= 0.5);
  }
}

TEST_CASE("mixture weights must sum to one") {
  MixtureComponent c;
  c.weight = 0.7;
  c.params = {{"slip", ParamDist::uniform(0, 0.3)},
              {"reward_scale", ParamDist::uniform(0.5, 1.0)}};
  CHECK_THROWS_AS(TaskDistribution(TaskFamily::kChain, 5, 0.9, {c}), std::domain_error);
  CHECK_THROWS_AS(TaskDistribution(TaskFamily::kChain, 5, 0.9, {}), std::invalid_argument);
}

TEST_CASE("cart-pole rewards are normalized into [0, 1] per episode") {
  const TaskDistribution uniform = TaskDistribution::cartpole_uniform(50, 0.99);
  auto features = uniform.default_features();
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamMdp task = sample_task(uniform, trial);
    Eigen::VectorXd theta(features->dim());
    for (int i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
    const Trajectory traj = rollout(task, GibbsLinearPolicy(theta, features), trial);
    double raw = 0.0;
    for (const auto& s : traj.steps) {
      CHECK(s.reward >= 0.0);
      CHECK(s.reward <= 1.0);
      raw += s.reward;
    }
    CHECK(raw <= 1.0 + 1e-12);
  }
}
