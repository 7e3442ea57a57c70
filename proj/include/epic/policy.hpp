#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <vector>

#include "epic/rng.hpp"

namespace epic {

// Numerically stable ln(1 + exp(x)).
double softplus(double x);
// Inverse of softplus on (0, inf).
double softplus_inverse(double y);

// ---------------------------------------------------------------------------
// Flat diagonal Gaussian over a policy-parameter vector. This is both the
// learned "world policy" and its evolving prior.
// ---------------------------------------------------------------------------

struct GaussianPolicyDistribution {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  // per-coordinate std, strictly positive

  GaussianPolicyDistribution() = default;
  GaussianPolicyDistribution(Eigen::VectorXd mean, Eigen::VectorXd std);

  int dim() const { return static_cast<int>(mu.size()); }
};

// theta = mu + sigma (.) epsilon
Eigen::VectorXd sample_theta(const GaussianPolicyDistribution& dist, const NoiseDraw& noise);

// KL(p || q) between diagonal Gaussians, closed form.
double kl_diag_gaussian(const GaussianPolicyDistribution& p, const GaussianPolicyDistribution& q);

nlohmann::json gaussian_to_json(const GaussianPolicyDistribution& dist);
GaussianPolicyDistribution gaussian_from_json(const nlohmann::json& j);

struct LayeredGaussianPolicy;
nlohmann::json layered_to_json(const LayeredGaussianPolicy& policy);
LayeredGaussianPolicy layered_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Feature maps for the linear Gibbs policy.
// ---------------------------------------------------------------------------

class FeatureMap {
 public:
  virtual ~FeatureMap() = default;
  virtual int dim() const = 0;
  virtual int num_actions() const = 0;
  virtual Eigen::VectorXd features(const Eigen::VectorXd& state, int action) const = 0;
};

// Per-action block of [state; 1]; dim = num_actions * (state_dim + 1).
// Optional per-coordinate scales normalize state ranges so no coordinate
// dominates the scores.
class BlockStateFeatures final : public FeatureMap {
 public:
  BlockStateFeatures(int state_dim, int num_actions);
  BlockStateFeatures(Eigen::VectorXd scale, int num_actions);
  int dim() const override { return num_actions_ * (state_dim_ + 1); }
  int num_actions() const override { return num_actions_; }
  Eigen::VectorXd features(const Eigen::VectorXd& state, int action) const override;

 private:
  int state_dim_;
  int num_actions_;
  Eigen::VectorXd scale_;
};

// One-hot over (state index, action); states are length-1 vectors holding the
// index. dim = num_states * num_actions.
class TabularFeatures final : public FeatureMap {
 public:
  TabularFeatures(int num_states, int num_actions);
  int dim() const override { return num_states_ * num_actions_; }
  int num_actions() const override { return num_actions_; }
  Eigen::VectorXd features(const Eigen::VectorXd& state, int action) const override;

 private:
  int num_states_;
  int num_actions_;
};

// One-dimensional theta: score(s, a) = theta * x(s) * dir(a) with dir = +-1/2
// for two actions. Small enough for quadrature over theta.
class ScalarDirectionFeatures final : public FeatureMap {
 public:
  explicit ScalarDirectionFeatures(std::vector<double> state_values);
  int dim() const override { return 1; }
  int num_actions() const override { return 2; }
  Eigen::VectorXd features(const Eigen::VectorXd& state, int action) const override;

 private:
  std::vector<double> state_values_;
};

// ---------------------------------------------------------------------------
// Gibbs (softmax) policy, linear in features.
// ---------------------------------------------------------------------------

class GibbsLinearPolicy {
 public:
  GibbsLinearPolicy(Eigen::VectorXd theta, std::shared_ptr<const FeatureMap> features);

  Eigen::VectorXd action_probs(const Eigen::VectorXd& state) const;
  Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& state, int action) const;
  int sample_action(const Eigen::VectorXd& state, Rng& rng) const;

  const Eigen::VectorXd& theta() const { return theta_; }
  const FeatureMap& features() const { return *features_; }
  std::shared_ptr<const FeatureMap> features_ptr() const { return features_; }
  int num_actions() const { return features_->num_actions(); }

 private:
  Eigen::VectorXd theta_;
  std::shared_ptr<const FeatureMap> features_;
};

// ---------------------------------------------------------------------------
// Layered Gaussian parameterization of a small MLP, with multiplicative
// noise: w_r = mu_r (.) (1 + gamma_r eps_r), gamma_r = softplus(delta_r).
// ---------------------------------------------------------------------------

enum class Activation { kTanh, kRelu };

struct GaussianLayer {
  Eigen::MatrixXd mu_w;      // (out x in)
  Eigen::MatrixXd delta_w;   // same shape; weight scale pre-activation
  Eigen::VectorXd mu_b;      // (out)
  Eigen::VectorXd delta_b;   // (out)
  Activation activation = Activation::kTanh;
};

struct LayeredGaussianPolicy {
  std::vector<GaussianLayer> layers;

  LayeredGaussianPolicy() = default;
  explicit LayeredGaussianPolicy(std::vector<GaussianLayer> ls);

  int input_dim() const { return static_cast<int>(layers.front().mu_w.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().mu_w.rows()); }
};

// Random init: mu ~ N(0, 2/fan_in), delta = -2.
LayeredGaussianPolicy make_layered_policy(const std::vector<int>& dims, Activation hidden,
                                          std::uint64_t seed);

struct LayerNoise {
  Eigen::MatrixXd eps_w;
  Eigen::VectorXd eps_b;
};

std::vector<LayerNoise> make_layer_noise(const LayeredGaussianPolicy& policy, std::uint64_t seed,
                                         std::uint64_t index);

struct MlpWeights {
  struct Layer {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
    Activation activation;
  };
  std::vector<Layer> layers;

  // Scores for the final layer (no activation on the output layer).
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
};

MlpWeights sample_layered(const LayeredGaussianPolicy& policy, const std::vector<LayerNoise>& noise);

// Gradients with respect to the concrete sampled weights, as produced by
// backprop through MlpWeights.
struct WeightGradient {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

// Chain a sampled-weight gradient back to (mu_r, delta_r) through
// w_r = mu_r (.) (1 + softplus(delta_r) eps_r).
struct LayeredGradient {
  std::vector<Eigen::MatrixXd> mu_w;
  std::vector<Eigen::MatrixXd> delta_w;
  std::vector<Eigen::VectorXd> mu_b;
  std::vector<Eigen::VectorXd> delta_b;
};

LayeredGradient layered_param_gradient(const LayeredGaussianPolicy& policy,
                                       const std::vector<LayerNoise>& noise,
                                       const WeightGradient& weight_grad);

// Softmax policy over MLP scores; grad_log_prob backpropagates to the packed
// flat weight vector so the lifelong loop can treat theta generically.
class MlpGibbsPolicy {
 public:
  MlpGibbsPolicy(std::vector<int> dims, Activation hidden);

  int param_dim() const { return param_dim_; }
  int num_actions() const { return dims_.back(); }

  MlpWeights unpack(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd pack(const MlpWeights& weights) const;

  Eigen::VectorXd action_probs(const Eigen::VectorXd& theta, const Eigen::VectorXd& state) const;
  Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& theta, const Eigen::VectorXd& state,
                                int action) const;

 private:
  std::vector<int> dims_;
  Activation hidden_;
  int param_dim_;
};

// An MlpGibbsPolicy bound to a concrete theta; mirrors the GibbsLinearPolicy
// surface so rollouts and gradient estimation work for either family.
class MlpPolicy {
 public:
  MlpPolicy(Eigen::VectorXd theta, std::shared_ptr<const MlpGibbsPolicy> family)
      : theta_(std::move(theta)), family_(std::move(family)) {
    if (!family_) throw std::invalid_argument("MlpPolicy: null family");
    if (theta_.size() != family_->param_dim())
      throw std::invalid_argument("MlpPolicy: theta size does not match network");
  }

  Eigen::VectorXd action_probs(const Eigen::VectorXd& state) const {
    return family_->action_probs(theta_, state);
  }
  Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& state, int action) const {
    return family_->grad_log_prob(theta_, state, action);
  }
  int sample_action(const Eigen::VectorXd& state, Rng& rng) const {
    const Eigen::VectorXd probs = action_probs(state);
    return rng.categorical(std::span<const double>(probs.data(), probs.size()));
  }
  const Eigen::VectorXd& theta() const { return theta_; }
  int num_actions() const { return family_->num_actions(); }

 private:
  Eigen::VectorXd theta_;
  std::shared_ptr<const MlpGibbsPolicy> family_;
};

}  // namespace epic
