#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "epic/policy.hpp"
#include "epic/rng.hpp"

namespace epic {

// ---------------------------------------------------------------------------
// Parameterized MDPs: cart-pole physics and small tabular chains.
// ---------------------------------------------------------------------------

struct CartPoleParams {
  double cart_mass = 1.0;    // kg
  double pole_mass = 0.1;    // kg
  double pole_length = 0.5;  // m, full length
};

struct ChainParams {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> transition;  // [s][a][s'] row-major, rows sum to 1
  std::vector<double> reward;      // [s][a], values in [0, 1]
  int initial_state = 0;

  double t(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2];
  }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * num_actions + a]; }
};

enum class MdpKind { kCartPole, kChainMdp };

class ParamMdp {
 public:
  static ParamMdp cart_pole(CartPoleParams params, int horizon, double discount);
  static ParamMdp chain(ChainParams params, int horizon, double discount);

  MdpKind kind() const { return kind_; }
  int horizon() const { return horizon_; }
  double discount() const { return discount_; }
  // Episodes run over H consecutive states, i.e. H-1 transitions (min 1).
  int max_steps() const { return horizon_ > 2 ? horizon_ - 1 : 1; }
  int num_actions() const;
  int state_dim() const;

  Eigen::VectorXd initial_state(Rng& rng) const;

  struct StepResult {
    Eigen::VectorXd next_state;
    double reward;
    bool done;
  };
  StepResult step(const Eigen::VectorXd& state, int action, Rng& rng) const;

  const CartPoleParams& cart_pole_params() const;
  const ChainParams& chain_params() const;

  // Named parameters as logged to rewards.csv.
  const std::vector<std::pair<std::string, double>>& param_record() const { return record_; }
  void set_param_record(std::vector<std::pair<std::string, double>> record) {
    record_ = std::move(record);
  }

  std::uint64_t content_hash() const;

 private:
  ParamMdp() = default;

  MdpKind kind_ = MdpKind::kChainMdp;
  int horizon_ = 0;
  double discount_ = 0.0;
  CartPoleParams cart_;
  ChainParams chain_;
  std::vector<std::pair<std::string, double>> record_;
};

struct TrajectoryStep {
  Eigen::VectorXd state;
  int action;
  double reward;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double return_discounted = 0.0;
};

Trajectory rollout(const ParamMdp& mdp, const GibbsLinearPolicy& policy, std::uint64_t seed);

// Same episode loop for any policy exposing sample_action/num_actions.
template <typename Policy>
Trajectory rollout_policy(const ParamMdp& mdp, const Policy& policy, std::uint64_t seed) {
  if (policy.num_actions() != mdp.num_actions())
    throw std::invalid_argument("rollout: policy action space does not match task");
  Rng rng(derive_seed(seed, 0x726f6cULL));
  Trajectory traj;
  Eigen::VectorXd state = mdp.initial_state(rng);
  double discount_pow = 1.0;
  for (int h = 0; h < mdp.max_steps(); ++h) {
    const int action = policy.sample_action(state, rng);
    const auto result = mdp.step(state, action, rng);
    traj.steps.push_back({state, action, result.reward});
    traj.return_discounted += discount_pow * result.reward;
    discount_pow *= mdp.discount();
    if (result.done) break;
    state = result.next_state;
  }
  return traj;
}

// Exact evaluators for tabular chains (oracle plumbing; error on cart-pole).
double exact_expected_return(const ParamMdp& mdp, const GibbsLinearPolicy& policy);
Eigen::VectorXd exact_return_gradient(const ParamMdp& mdp, const GibbsLinearPolicy& policy);
double exact_return_variance(const ParamMdp& mdp, const GibbsLinearPolicy& policy);

// ---------------------------------------------------------------------------
// Lifelong task distributions: mixtures of per-parameter distributions.
// ---------------------------------------------------------------------------

struct ParamDist {
  enum class Kind { kNormal, kUniform, kCategorical };
  Kind kind = Kind::kUniform;
  double mean = 0.0, std = 0.0;  // normal
  double lo = 0.0, hi = 0.0;     // uniform
  std::vector<double> values;    // categorical
  std::vector<double> probs;
  double support_lo = -1e300;  // physical support; samples outside are
  double support_hi = 1e300;   // resampled then clamped

  static ParamDist normal(double mean, double std, double support_lo, double support_hi);
  static ParamDist uniform(double lo, double hi);
  static ParamDist categorical(std::vector<double> values, std::vector<double> probs);

  double sample(Rng& rng) const;
};

struct MixtureComponent {
  double weight = 1.0;
  std::vector<std::pair<std::string, ParamDist>> params;
};

enum class TaskFamily { kCartPole, kChain };

struct TaskDistribution {
  TaskFamily family = TaskFamily::kChain;
  int horizon = 5;
  double discount = 0.9;
  std::vector<MixtureComponent> components;

  TaskDistribution() = default;
  TaskDistribution(TaskFamily family, int horizon, double discount,
                   std::vector<MixtureComponent> components);

  int state_dim() const { return family == TaskFamily::kCartPole ? 4 : 1; }
  int num_actions() const { return 2; }
  std::shared_ptr<const FeatureMap> default_features() const;
  std::vector<Eigen::VectorXd> probe_states() const;

  static TaskDistribution cartpole_uniform(int horizon = 100, double discount = 0.99);
  static TaskDistribution cartpole_gmm(int horizon = 100, double discount = 0.99);
  static TaskDistribution chain_suite(int horizon = 5, double discount = 0.9);
  static TaskDistribution chain_fixed(int horizon = 5, double discount = 0.9);

  static TaskDistribution by_name(const std::string& name, int horizon, double discount);
};

ParamMdp sample_task(const TaskDistribution& td, std::uint64_t seed);

// The canonical 3-state chain behind the chain task family.
ParamMdp make_chain_task(double slip, double reward_scale, int horizon, double discount);

}  // namespace epic
