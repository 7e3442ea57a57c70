#include "epic/envs.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace epic {

namespace {

constexpr double kTimeStep = 0.02;      // s
constexpr double kForceMag = 10.0;      // N
constexpr double kGravity = 9.8;        // m/s^2
constexpr double kPositionLimit = 2.4;  // m
const double kAngleLimit = 12.0 * std::numbers::pi / 180.0;

void validate_chain(const ChainParams& p) {
  if (p.num_states <= 0 || p.num_actions <= 0)
    throw std::invalid_argument("ChainParams: state/action counts must be positive");
  if (p.transition.size() !=
      static_cast<std::size_t>(p.num_states) * p.num_actions * p.num_states)
    throw std::invalid_argument("ChainParams: transition tensor size mismatch");
  if (p.reward.size() != static_cast<std::size_t>(p.num_states) * p.num_actions)
    throw std::invalid_argument("ChainParams: reward tensor size mismatch");
  for (int s = 0; s < p.num_states; ++s) {
    for (int a = 0; a < p.num_actions; ++a) {
      double row = 0.0;
      for (int s2 = 0; s2 < p.num_states; ++s2) {
        const double t = p.t(s, a, s2);
        if (t < 0.0) throw std::domain_error("ChainParams: negative transition probability");
        row += t;
      }
      if (std::abs(row - 1.0) > 1e-12)
        throw std::domain_error("ChainParams: transition row does not sum to 1");
      const double r = p.r(s, a);
      if (r < 0.0 || r > 1.0) throw std::domain_error("ChainParams: reward outside [0, 1]");
    }
  }
  if (p.initial_state < 0 || p.initial_state >= p.num_states)
    throw std::invalid_argument("ChainParams: initial state out of range");
}

std::uint64_t hash_double(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return mix64(h ^ bits);
}

}  // namespace

ParamMdp ParamMdp::cart_pole(CartPoleParams params, int horizon, double discount) {
  if (!(params.cart_mass > 0.0) || !(params.pole_mass > 0.0) || !(params.pole_length > 0.0))
    throw std::domain_error("CartPoleParams: masses and length must be strictly positive");
  if (horizon < 1) throw std::invalid_argument("ParamMdp: horizon must be positive");
  if (!(discount > 0.0 && discount < 1.0))
    throw std::domain_error("ParamMdp: discount must lie in (0, 1)");
  ParamMdp mdp;
  mdp.kind_ = MdpKind::kCartPole;
  mdp.horizon_ = horizon;
  mdp.discount_ = discount;
  mdp.cart_ = params;
  mdp.record_ = {{"cart_mass", params.cart_mass},
                 {"pole_mass", params.pole_mass},
                 {"pole_length", params.pole_length}};
  return mdp;
}

ParamMdp ParamMdp::chain(ChainParams params, int horizon, double discount) {
  validate_chain(params);
  if (horizon < 1) throw std::invalid_argument("ParamMdp: horizon must be positive");
  if (!(discount > 0.0 && discount < 1.0))
    throw std::domain_error("ParamMdp: discount must lie in (0, 1)");
  ParamMdp mdp;
  mdp.kind_ = MdpKind::kChainMdp;
  mdp.horizon_ = horizon;
  mdp.discount_ = discount;
  mdp.chain_ = std::move(params);
  return mdp;
}

int ParamMdp::num_actions() const {
  return kind_ == MdpKind::kCartPole ? 2 : chain_.num_actions;
}

int ParamMdp::state_dim() const { return kind_ == MdpKind::kCartPole ? 4 : 1; }

Eigen::VectorXd ParamMdp::initial_state(Rng& rng) const {
  if (kind_ == MdpKind::kCartPole) {
    Eigen::VectorXd s(4);
    for (int i = 0; i < 4; ++i) s[i] = rng.uniform(-0.05, 0.05);
    return s;
  }
  Eigen::VectorXd s(1);
  s[0] = chain_.initial_state;
  return s;
}

ParamMdp::StepResult ParamMdp::step(const Eigen::VectorXd& state, int action, Rng& rng) const {
  if (action < 0 || action >= num_actions())
    throw std::domain_error("ParamMdp::step: invalid action index");
  if (kind_ == MdpKind::kChainMdp) {
    const int s = static_cast<int>(std::lround(state[0]));
    if (s < 0 || s >= chain_.num_states)
      throw std::domain_error("ParamMdp::step: chain state out of range");
    const double reward = chain_.r(s, action);
    const double u = rng.uniform();
    double acc = 0.0;
    int next = chain_.num_states - 1;
    for (int s2 = 0; s2 < chain_.num_states; ++s2) {
      acc += chain_.t(s, action, s2);
      if (u < acc) {
        next = s2;
        break;
      }
    }
    Eigen::VectorXd ns(1);
    ns[0] = next;
    return {ns, reward, false};
  }

  // Semi-implicit Euler cart-pole with per-task masses and length.
  const double x = state[0], x_dot = state[1], theta = state[2], theta_dot = state[3];
  const double force = (action == 1) ? kForceMag : -kForceMag;
  const double total_mass = cart_.cart_mass + cart_.pole_mass;
  const double half_length = cart_.pole_length / 2.0;
  const double polemass_length = cart_.pole_mass * half_length;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (half_length * (4.0 / 3.0 - cart_.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  Eigen::VectorXd ns(4);
  ns[1] = x_dot + kTimeStep * x_acc;
  ns[0] = x + kTimeStep * ns[1];
  ns[3] = theta_dot + kTimeStep * theta_acc;
  ns[2] = theta + kTimeStep * ns[3];

  const bool done = std::abs(ns[0]) > kPositionLimit || std::abs(ns[2]) > kAngleLimit;
  // Reward 1 per surviving step scaled by 1/H so episode totals stay in [0, 1].
  const double reward = done ? 0.0 : 1.0 / horizon_;
  return {ns, reward, done};
}

const CartPoleParams& ParamMdp::cart_pole_params() const {
  if (kind_ != MdpKind::kCartPole) throw std::logic_error("not a cart-pole task");
  return cart_;
}

const ChainParams& ParamMdp::chain_params() const {
  if (kind_ != MdpKind::kChainMdp) throw std::logic_error("not a chain task");
  return chain_;
}

std::uint64_t ParamMdp::content_hash() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(kind_) + 11);
  h = mix64(h ^ static_cast<std::uint64_t>(horizon_));
  h = hash_double(h, discount_);
  if (kind_ == MdpKind::kCartPole) {
    h = hash_double(h, cart_.cart_mass);
    h = hash_double(h, cart_.pole_mass);
    h = hash_double(h, cart_.pole_length);
  } else {
    for (double v : chain_.transition) h = hash_double(h, v);
    for (double v : chain_.reward) h = hash_double(h, v);
    h = mix64(h ^ static_cast<std::uint64_t>(chain_.initial_state));
  }
  return h;
}

Trajectory rollout(const ParamMdp& mdp, const GibbsLinearPolicy& policy, std::uint64_t seed) {
  return rollout_policy(mdp, policy, seed);
}

namespace {

// Per-state action probabilities for every chain state, once.
std::vector<Eigen::VectorXd> chain_action_probs(const ChainParams& chain,
                                                const GibbsLinearPolicy& policy) {
  std::vector<Eigen::VectorXd> probs(chain.num_states);
  for (int s = 0; s < chain.num_states; ++s) {
    Eigen::VectorXd sv(1);
    sv[0] = s;
    probs[s] = policy.action_probs(sv);
  }
  return probs;
}

}  // namespace

double exact_expected_return(const ParamMdp& mdp, const GibbsLinearPolicy& policy) {
  if (mdp.kind() != MdpKind::kChainMdp)
    throw std::invalid_argument("exact_expected_return: only tabular chains are supported");
  const ChainParams& chain = mdp.chain_params();
  const auto probs = chain_action_probs(chain, policy);
  const int n_steps = mdp.max_steps();
  // Backward induction over the remaining horizon; local discounting, so the
  // value at the initial step carries gamma^{h-1} weights.
  Eigen::VectorXd value = Eigen::VectorXd::Zero(chain.num_states);
  for (int h = n_steps - 1; h >= 0; --h) {
    Eigen::VectorXd next(chain.num_states);
    for (int s = 0; s < chain.num_states; ++s) {
      double v = 0.0;
      for (int a = 0; a < chain.num_actions; ++a) {
        double q = chain.r(s, a);
        if (h + 1 < n_steps) {
          double cont = 0.0;
          for (int s2 = 0; s2 < chain.num_states; ++s2) cont += chain.t(s, a, s2) * value[s2];
          q += mdp.discount() * cont;
        }
        v += probs[s][a] * q;
      }
      next[s] = v;
    }
    value = next;
  }
  return value[chain.initial_state];
}

Eigen::VectorXd exact_return_gradient(const ParamMdp& mdp, const GibbsLinearPolicy& policy) {
  if (mdp.kind() != MdpKind::kChainMdp)
    throw std::invalid_argument("exact_return_gradient: only tabular chains are supported");
  const ChainParams& chain = mdp.chain_params();
  const auto probs = chain_action_probs(chain, policy);
  const int n_steps = mdp.max_steps();

  // Q_h(s, a) by backward induction, with local discounting.
  std::vector<Eigen::MatrixXd> q(n_steps);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(chain.num_states);
  for (int h = n_steps - 1; h >= 0; --h) {
    q[h].resize(chain.num_states, chain.num_actions);
    for (int s = 0; s < chain.num_states; ++s) {
      for (int a = 0; a < chain.num_actions; ++a) {
        double qa = chain.r(s, a);
        if (h + 1 < n_steps) {
          double cont = 0.0;
          for (int s2 = 0; s2 < chain.num_states; ++s2) cont += chain.t(s, a, s2) * value[s2];
          qa += mdp.discount() * cont;
        }
        q[h](s, a) = qa;
      }
    }
    Eigen::VectorXd next(chain.num_states);
    for (int s = 0; s < chain.num_states; ++s) next[s] = q[h].row(s).dot(probs[s]);
    value = next;
  }

  // Policy-gradient theorem: grad J = sum_h gamma^{h-1} sum_s d_h(s)
  //   sum_a pi(a|s) grad log pi(a|s) Q_h(s,a).
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(chain.num_states);
  dist[chain.initial_state] = 1.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.theta().size());
  double discount_pow = 1.0;
  for (int h = 0; h < n_steps; ++h) {
    for (int s = 0; s < chain.num_states; ++s) {
      if (dist[s] == 0.0) continue;
      Eigen::VectorXd sv(1);
      sv[0] = s;
      for (int a = 0; a < chain.num_actions; ++a) {
        grad += discount_pow * dist[s] * probs[s][a] * q[h](s, a) * policy.grad_log_prob(sv, a);
      }
    }
    if (h + 1 < n_steps) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(chain.num_states);
      for (int s = 0; s < chain.num_states; ++s) {
        if (dist[s] == 0.0) continue;
        for (int a = 0; a < chain.num_actions; ++a)
          for (int s2 = 0; s2 < chain.num_states; ++s2)
            next[s2] += dist[s] * probs[s][a] * chain.t(s, a, s2);
      }
      dist = next;
    }
    discount_pow *= mdp.discount();
  }
  return grad;
}

double exact_return_variance(const ParamMdp& mdp, const GibbsLinearPolicy& policy) {
  if (mdp.kind() != MdpKind::kChainMdp)
    throw std::invalid_argument("exact_return_variance: only tabular chains are supported");
  const ChainParams& chain = mdp.chain_params();
  const auto probs = chain_action_probs(chain, policy);
  const int n_steps = mdp.max_steps();
  // First and second moments of the return-to-go, backward in time:
  //   G_h = r + gamma G_{h+1}
  //   m2_h(s) = E[(r + gamma G)^2] expanded over (a, s').
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(chain.num_states);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(chain.num_states);
  for (int h = n_steps - 1; h >= 0; --h) {
    Eigen::VectorXd m1_next(chain.num_states), m2_next(chain.num_states);
    for (int s = 0; s < chain.num_states; ++s) {
      double e1 = 0.0, e2 = 0.0;
      for (int a = 0; a < chain.num_actions; ++a) {
        const double r = chain.r(s, a);
        double cont1 = 0.0, cont2 = 0.0;
        if (h + 1 < n_steps) {
          for (int s2 = 0; s2 < chain.num_states; ++s2) {
            cont1 += chain.t(s, a, s2) * m1[s2];
            cont2 += chain.t(s, a, s2) * m2[s2];
          }
        }
        e1 += probs[s][a] * (r + mdp.discount() * cont1);
        e2 += probs[s][a] *
              (r * r + 2.0 * mdp.discount() * r * cont1 + mdp.discount() * mdp.discount() * cont2);
      }
      m1_next[s] = e1;
      m2_next[s] = e2;
    }
    m1 = m1_next;
    m2 = m2_next;
  }
  const double mean = m1[chain.initial_state];
  return m2[chain.initial_state] - mean * mean;
}

// --------------------------------------------------------------------------
// Task distributions
// --------------------------------------------------------------------------

ParamDist ParamDist::normal(double mean, double std, double support_lo, double support_hi) {
  ParamDist d;
  d.kind = Kind::kNormal;
  d.mean = mean;
  d.std = std;
  d.support_lo = support_lo;
  d.support_hi = support_hi;
  return d;
}

ParamDist ParamDist::uniform(double lo, double hi) {
  ParamDist d;
  d.kind = Kind::kUniform;
  d.lo = lo;
  d.hi = hi;
  d.support_lo = lo;
  d.support_hi = hi;
  return d;
}

ParamDist ParamDist::categorical(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size())
    throw std::invalid_argument("ParamDist::categorical: values/probs mismatch");
  ParamDist d;
  d.kind = Kind::kCategorical;
  d.values = std::move(values);
  d.probs = std::move(probs);
  return d;
}

double ParamDist::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kUniform:
      return rng.uniform(lo, hi);
    case Kind::kCategorical:
      return values[rng.categorical(probs)];
    case Kind::kNormal: {
      // Resample out-of-support draws a bounded number of times, then clamp.
      for (int attempt = 0; attempt < 100; ++attempt) {
        const double v = rng.normal(mean, std);
        if (v >= support_lo && v <= support_hi) return v;
      }
      return std::min(std::max(mean, support_lo), support_hi);
    }
  }
  throw std::logic_error("ParamDist: unknown kind");
}

TaskDistribution::TaskDistribution(TaskFamily family, int horizon, double discount,
                                   std::vector<MixtureComponent> comps)
    : family(family), horizon(horizon), discount(discount), components(std::move(comps)) {
  if (components.empty()) throw std::invalid_argument("TaskDistribution: empty component list");
  double total = 0.0;
  for (const auto& c : components) {
    if (c.weight < 0.0) throw std::domain_error("TaskDistribution: negative component weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::domain_error("TaskDistribution: component weights must sum to 1");
}

std::shared_ptr<const FeatureMap> TaskDistribution::default_features() const {
  if (family == TaskFamily::kCartPole) {
    // Normalize by the termination thresholds / typical velocity range.
    Eigen::VectorXd scale(4);
    scale << 1.0 / 2.4, 1.0 / 3.0, 1.0 / 0.21, 1.0 / 3.0;
    return std::make_shared<BlockStateFeatures>(scale, 2);
  }
  return std::make_shared<TabularFeatures>(3, 2);
}

std::vector<Eigen::VectorXd> TaskDistribution::probe_states() const {
  std::vector<Eigen::VectorXd> states;
  if (family == TaskFamily::kChain) {
    for (int s = 0; s < 3; ++s) {
      Eigen::VectorXd v(1);
      v[0] = s;
      states.push_back(v);
    }
    return states;
  }
  for (double x : {-1.0, 0.0, 1.0})
    for (double theta : {-0.1, 0.0, 0.1})
      for (double theta_dot : {-1.0, 1.0}) {
        Eigen::VectorXd v(4);
        v << x, 0.0, theta, theta_dot;
        states.push_back(v);
      }
  return states;
}

TaskDistribution TaskDistribution::cartpole_uniform(int horizon, double discount) {
  MixtureComponent c;
  c.weight = 1.0;
  c.params = {{"cart_mass", ParamDist::uniform(1.0, 5.0)},
              {"pole_mass", ParamDist::uniform(0.1, 0.5)},
              {"pole_length", ParamDist::uniform(0.3, 0.7)}};
  return TaskDistribution(TaskFamily::kCartPole, horizon, discount, {c});
}

TaskDistribution TaskDistribution::cartpole_gmm(int horizon, double discount) {
  // Five shared-weight components; marginals match the per-parameter mixtures.
  const std::vector<double> weights = {0.15, 0.15, 0.18, 0.18, 0.34};
  const std::vector<double> cart_mass = {1.0, 5.0, 2.0, 4.0, 3.0};
  const std::vector<double> pole_mass = {0.4, 0.5, 0.2, 0.3, 0.1};
  const std::vector<double> pole_length = {0.3, 0.7, 0.4, 0.6, 0.5};
  std::vector<MixtureComponent> comps;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    MixtureComponent c;
    c.weight = weights[k];
    c.params = {{"cart_mass", ParamDist::normal(cart_mass[k], 0.1, 0.05, 10.0)},
                {"pole_mass", ParamDist::normal(pole_mass[k], 0.01, 0.01, 2.0)},
                {"pole_length", ParamDist::normal(pole_length[k], 0.01, 0.05, 2.0)}};
    comps.push_back(std::move(c));
  }
  return TaskDistribution(TaskFamily::kCartPole, horizon, discount, std::move(comps));
}

TaskDistribution TaskDistribution::chain_suite(int horizon, double discount) {
  MixtureComponent c;
  c.weight = 1.0;
  c.params = {{"slip", ParamDist::uniform(0.0, 0.3)},
              {"reward_scale", ParamDist::uniform(0.5, 1.0)}};
  return TaskDistribution(TaskFamily::kChain, horizon, discount, {c});
}

TaskDistribution TaskDistribution::chain_fixed(int horizon, double discount) {
  MixtureComponent c;
  c.weight = 1.0;
  c.params = {{"slip", ParamDist::categorical({0.1}, {1.0})},
              {"reward_scale", ParamDist::categorical({1.0}, {1.0})}};
  return TaskDistribution(TaskFamily::kChain, horizon, discount, {c});
}

TaskDistribution TaskDistribution::by_name(const std::string& name, int horizon, double discount) {
  if (name == "cartpole_uniform") return cartpole_uniform(horizon, discount);
  if (name == "cartpole_gmm") return cartpole_gmm(horizon, discount);
  if (name == "chain_suite") return chain_suite(horizon, discount);
  if (name == "chain_fixed") return chain_fixed(horizon, discount);
  throw std::invalid_argument("unknown environment name: " + name);
}

ParamMdp make_chain_task(double slip, double reward_scale, int horizon, double discount) {
  if (slip < 0.0 || slip > 0.5) throw std::domain_error("make_chain_task: slip outside [0, 0.5]");
  if (reward_scale < 0.0 || reward_scale > 1.0)
    throw std::domain_error("make_chain_task: reward_scale outside [0, 1]");
  ChainParams p;
  p.num_states = 3;
  p.num_actions = 2;
  p.transition.assign(static_cast<std::size_t>(3) * 2 * 3, 0.0);
  p.reward.assign(static_cast<std::size_t>(3) * 2, 0.0);
  auto set_t = [&](int s, int a, int s2, double v) {
    p.transition[(static_cast<std::size_t>(s) * 2 + a) * 3 + s2] = v;
  };
  for (int s = 0; s < 3; ++s) {
    const int left = std::max(s - 1, 0);
    const int right = std::min(s + 1, 2);
    set_t(s, 0, left, 1.0 - slip);
    set_t(s, 0, s, p.t(s, 0, s) + slip);
    set_t(s, 1, right, 1.0 - slip);
    set_t(s, 1, s, p.t(s, 1, s) + slip);
    for (int a = 0; a < 2; ++a) p.reward[static_cast<std::size_t>(s) * 2 + a] = reward_scale * s / 2.0;
  }
  p.initial_state = 0;
  auto mdp = ParamMdp::chain(std::move(p), horizon, discount);
  mdp.set_param_record({{"slip", slip}, {"reward_scale", reward_scale}});
  return mdp;
}

ParamMdp sample_task(const TaskDistribution& td, std::uint64_t seed) {
  if (td.components.empty()) throw std::invalid_argument("sample_task: empty component list");
  Rng rng(derive_seed(seed, stream::kTask));
  std::vector<double> weights;
  weights.reserve(td.components.size());
  for (const auto& c : td.components) weights.push_back(c.weight);
  const auto& comp = td.components[static_cast<std::size_t>(
      rng.categorical(std::span<const double>(weights.data(), weights.size())))];

  std::vector<std::pair<std::string, double>> drawn;
  for (const auto& [name, dist] : comp.params) drawn.emplace_back(name, dist.sample(rng));
  auto get = [&](const std::string& name) {
    for (const auto& [n, v] : drawn)
      if (n == name) return v;
    throw std::invalid_argument("sample_task: missing parameter " + name);
  };

  if (td.family == TaskFamily::kCartPole) {
    CartPoleParams params{get("cart_mass"), get("pole_mass"), get("pole_length")};
    auto mdp = ParamMdp::cart_pole(params, td.horizon, td.discount);
    mdp.set_param_record(drawn);
    return mdp;
  }
  return make_chain_task(get("slip"), get("reward_scale"), td.horizon, td.discount);
}

}  // namespace epic
