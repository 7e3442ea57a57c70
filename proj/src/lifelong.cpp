#include "epic/lifelong.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "epic/quad.hpp"

namespace epic {

void MemoryBuffer::store(ParamMdp task, int capacity) {
  if (static_cast<int>(tasks.size()) >= capacity)
    throw std::runtime_error("MemoryBuffer: capacity exceeded before update");
  tasks.push_back(std::move(task));
}

void MemoryBuffer::clear() {
  tasks.clear();
  trajectories.clear();
}

LifelongState make_initial_state(int dim, const RegularizerConfig& cfg,
                                 const TrainingConfig& tcfg) {
  LifelongState state;
  state.posterior = GaussianPolicyDistribution(Eigen::VectorXd::Zero(dim),
                                               Eigen::VectorXd::Constant(dim, tcfg.sigma_init));
  state.prior = state.posterior;
  state.lambda_now = cfg.lambda0;
  return state;
}

double RunLog::training_error() const {
  if (updates.empty()) return 0.0;
  double total = 0.0;
  int counted = 0;
  for (const auto& u : updates) {
    if (u.aborted) continue;
    total += -u.mean_training_return;
    ++counted;
  }
  return counted > 0 ? total / counted : 0.0;
}

double RunLog::mean_reward_over(int first_task, int last_task) const {
  double total = 0.0;
  int count = 0;
  for (const auto& t : tasks) {
    if (t.task_index >= first_task && t.task_index <= last_task) {
      total += t.reward;
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

namespace {

// Reward-to-go with gamma^{h-1} discounting from the episode start.
std::vector<double> reward_to_go(const Trajectory& traj, double discount) {
  const int len = static_cast<int>(traj.steps.size());
  std::vector<double> to_go(len, 0.0);
  double acc = 0.0;
  double discount_pow = std::pow(discount, len - 1);
  for (int h = len - 1; h >= 0; --h) {
    acc += discount_pow * traj.steps[h].reward;
    to_go[h] = acc;
    discount_pow /= discount;
  }
  return to_go;
}

// Per-step leave-one-out mean baseline over a batch. A trajectory alone at
// step h is its own baseline, so its advantage there is exactly zero; this is
// what makes a constant-return batch a strict no-op update.
struct StepBaseline {
  std::vector<double> sums;  // sum of to-go over trajectories reaching step h
  std::vector<int> counts;

  void add(const std::vector<double>& to_go) {
    if (to_go.size() > sums.size()) {
      sums.resize(to_go.size(), 0.0);
      counts.resize(to_go.size(), 0);
    }
    for (std::size_t h = 0; h < to_go.size(); ++h) {
      sums[h] += to_go[h];
      counts[h] += 1;
    }
  }

  double leave_one_out(std::size_t h, double own) const {
    return counts[h] > 1 ? (sums[h] - own) / (counts[h] - 1) : own;
  }
};

template <typename Policy>
Eigen::VectorXd trajectory_score_gradient(const Trajectory& traj, const Policy& policy,
                                          const std::vector<double>& to_go,
                                          const StepBaseline& baseline) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.theta().size());
  for (std::size_t h = 0; h < traj.steps.size(); ++h) {
    const double advantage = to_go[h] - baseline.leave_one_out(h, to_go[h]);
    if (advantage == 0.0) continue;
    grad += advantage * policy.grad_log_prob(traj.steps[h].state, traj.steps[h].action);
  }
  return grad;
}

void clip_global_norm(Eigen::VectorXd& g_mu, Eigen::VectorXd& g_log_sigma, double max_norm) {
  const double norm = std::sqrt(g_mu.squaredNorm() + g_log_sigma.squaredNorm());
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    g_mu *= scale;
    g_log_sigma *= scale;
  }
}

// Policy families the lifelong loops are generic over: a flat parameter
// vector theta mapped to a concrete policy.
struct LinearFamily {
  std::shared_ptr<const FeatureMap> features;
  int param_dim() const { return features->dim(); }
  GibbsLinearPolicy make(Eigen::VectorXd theta) const {
    return GibbsLinearPolicy(std::move(theta), features);
  }
};

struct MlpFamily {
  std::shared_ptr<const MlpGibbsPolicy> network;
  int param_dim() const { return network->param_dim(); }
  MlpPolicy make(Eigen::VectorXd theta) const { return MlpPolicy(std::move(theta), network); }
};

template <typename Family>
ReturnGradient estimate_gradient_family(const GaussianPolicyDistribution& posterior,
                                        const Family& family, const std::vector<ParamMdp>& tasks,
                                        int draws, std::uint64_t seed,
                                        std::vector<std::vector<Trajectory>>* rollouts_out = nullptr) {
  if (tasks.empty()) throw std::invalid_argument("estimate_return_gradient: no tasks");
  if (draws < 1) throw std::invalid_argument("estimate_return_gradient: draws must be >= 1");
  const int dim = posterior.dim();
  const int batch = static_cast<int>(tasks.size()) * draws;

  std::vector<Eigen::VectorXd> thetas(draws);
  std::vector<Eigen::VectorXd> epsilons(draws);
  for (int j = 0; j < draws; ++j) {
    const NoiseDraw noise = NoiseDraw::make(seed, static_cast<std::uint64_t>(j), dim);
    epsilons[j] = noise.epsilon;
    thetas[j] = sample_theta(posterior, noise);
  }

  // Baselines are per task, across that task's draws, so that differences in
  // task difficulty never enter the advantages.
  std::vector<std::vector<Trajectory>> rollouts(tasks.size());
  std::vector<std::vector<std::vector<double>>> to_go(tasks.size());
  std::vector<StepBaseline> baselines(tasks.size());
  double sum_return = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    rollouts[i].reserve(draws);
    for (int j = 0; j < draws; ++j) {
      rollouts[i].push_back(rollout_policy(tasks[i], family.make(thetas[j]),
                                           derive_seed(seed, stream::kRollout, i, j)));
      sum_return += rollouts[i].back().return_discounted;
      to_go[i].push_back(reward_to_go(rollouts[i].back(), tasks[i].discount()));
      baselines[i].add(to_go[i].back());
    }
  }

  // Sum over the window's tasks, mean over the policy draws; the return
  // reported alongside is the plain per-trajectory mean.
  ReturnGradient grad;
  grad.mu = Eigen::VectorXd::Zero(dim);
  grad.log_sigma = Eigen::VectorXd::Zero(dim);
  grad.mean_return = sum_return / batch;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (int j = 0; j < draws; ++j) {
      const auto policy = family.make(thetas[j]);
      const Eigen::VectorXd g_theta =
          trajectory_score_gradient(rollouts[i][j], policy, to_go[i][j], baselines[i]);
      grad.mu += g_theta;
      grad.log_sigma += g_theta.cwiseProduct(epsilons[j]);
    }
  }
  grad.mu /= draws;
  grad.log_sigma /= draws;
  grad.log_sigma = grad.log_sigma.cwiseProduct(posterior.sigma);
  if (rollouts_out) *rollouts_out = std::move(rollouts);
  return grad;
}

template <typename Family>
LifelongState update_family(const LifelongState& state, MemoryBuffer& buffer,
                            const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                            const Family& family, const std::vector<Eigen::VectorXd>& probe_states,
                            std::uint64_t seed, UpdateRecord* record) {
  if (static_cast<int>(buffer.tasks.size()) != tcfg.N)
    throw std::runtime_error("epicg_update: buffer must hold exactly N tasks");

  const int dim = state.posterior.dim();
  ReturnGradient ret_grad;
  bool numeric_failure = false;
  try {
    ret_grad = estimate_gradient_family(state.posterior, family, buffer.tasks, tcfg.M, seed,
                                        &buffer.trajectories);
  } catch (const std::domain_error&) {
    // Overflowed scores or non-finite rollout values count as a non-finite
    // gradient: the update is aborted and the previous state kept.
    numeric_failure = true;
    ret_grad.mu = Eigen::VectorXd::Zero(dim);
    ret_grad.log_sigma = Eigen::VectorXd::Zero(dim);
  }

  const double kl_pre = kl_diag_gaussian(state.posterior, state.prior);
  const double reg_value = training_regularizer(kl_pre, cfg);
  // The objective sums returns over the window's N tasks, so the regularizer
  // enters with weight N to keep both terms on the same per-window scale.
  const double reg_slope = static_cast<double>(cfg.N) * training_regularizer_grad(kl_pre, cfg);

  // d kl / d mu_i = (mu_i - prior_mu_i) / prior_sigma_i^2
  // d kl / d log sigma_i = sigma_i^2 / prior_sigma_i^2 - 1
  Eigen::VectorXd g_mu = -ret_grad.mu;
  Eigen::VectorXd g_log_sigma = -ret_grad.log_sigma;
  for (int i = 0; i < dim; ++i) {
    const double ps2 = state.prior.sigma[i] * state.prior.sigma[i];
    g_mu[i] += reg_slope * (state.posterior.mu[i] - state.prior.mu[i]) / ps2;
    g_log_sigma[i] +=
        reg_slope * (state.posterior.sigma[i] * state.posterior.sigma[i] / ps2 - 1.0);
  }
  clip_global_norm(g_mu, g_log_sigma, tcfg.grad_clip);

  LifelongState next = state;
  next.update_index = state.update_index + 1;

  UpdateRecord rec;
  rec.update_index = next.update_index;
  rec.tasks_seen = state.tasks_seen;
  rec.regularizer_value = reg_value;
  rec.mean_training_return = ret_grad.mean_return;

  if (numeric_failure || !g_mu.allFinite() || !g_log_sigma.allFinite()) {
    rec.aborted = true;
  } else {
    Eigen::VectorXd mu = state.posterior.mu - tcfg.beta * g_mu;
    Eigen::VectorXd log_sigma =
        state.posterior.sigma.array().log().matrix() - tcfg.beta * g_log_sigma;
    next.posterior = GaussianPolicyDistribution(mu, log_sigma.array().exp().matrix());
    next.prior = GaussianPolicyDistribution(
        (1.0 - state.lambda_now) * state.prior.mu + state.lambda_now * next.posterior.mu,
        (1.0 - state.lambda_now) * state.prior.sigma + state.lambda_now * next.posterior.sigma);
    next.lambda_now = state.lambda_now * cfg.alpha;
  }

  rec.kl_step = kl_diag_gaussian(next.posterior, next.prior);
  rec.r_hat_step = std::sqrt(kl_diag_gaussian(next.posterior, state.posterior) / 2.0);
  rec.premise_ok = rec.r_hat_step <= cfg.r;
  rec.kl_budget_ceiling = kl_budget(cfg, next.update_index + 1);
  if (cfg.K_so_far >= cfg.N) rec.bound_value = theorem1_bound(cfg);

  rec.s_min_hat = 1.0;
  try {
    const auto mean_policy = family.make(next.posterior.mu);
    for (const auto& s : probe_states)
      rec.s_min_hat = std::min(rec.s_min_hat, mean_policy.action_probs(s).minCoeff());
  } catch (const std::domain_error&) {
    rec.s_min_hat = std::numeric_limits<double>::quiet_NaN();
  }

  if (record) *record = rec;
  buffer.clear();
  return next;
}

template <typename Family>
Eigen::VectorXd fine_tune_family(Eigen::VectorXd theta, const ParamMdp& task,
                                 const Family& family, int steps, int batch, double step_size,
                                 std::uint64_t seed) {
  if (batch < 1) throw std::invalid_argument("fine_tune: batch must be >= 1");
  for (int step = 0; step < steps; ++step) {
    const auto policy = family.make(theta);
    std::vector<Trajectory> rollouts;
    std::vector<std::vector<double>> to_go;
    StepBaseline baseline;
    rollouts.reserve(batch);
    for (int b = 0; b < batch; ++b) {
      rollouts.push_back(rollout_policy(task, policy, derive_seed(seed, step, b)));
      to_go.push_back(reward_to_go(rollouts.back(), task.discount()));
      baseline.add(to_go.back());
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    for (int b = 0; b < batch; ++b)
      grad += trajectory_score_gradient(rollouts[b], policy, to_go[b], baseline);
    grad /= batch;
    const double norm = grad.norm();
    if (norm > 10.0) grad *= 10.0 / norm;
    if (!grad.allFinite()) break;
    theta += step_size * grad;
  }
  return theta;
}

enum class Algo { kEpicg, kEpicgFt, kSingleTask };

template <typename Family>
double evaluate_policy(const ParamMdp& task, const Family& family, const Eigen::VectorXd& theta,
                       int rollouts, std::uint64_t eval_seed) {
  const auto policy = family.make(theta);
  double total = 0.0;
  for (int e = 0; e < rollouts; ++e)
    total += rollout_policy(task, policy, derive_seed(eval_seed, e)).return_discounted;
  return total / rollouts;
}

template <typename Family>
RunLog run_stream(Algo algo, const TaskDistribution& stream, const Family& family,
                  const RegularizerConfig& cfg_in, const TrainingConfig& tcfg,
                  std::uint64_t seed) {
  RegularizerConfig cfg = cfg_in;
  cfg.N = tcfg.N;
  cfg.H = stream.horizon;
  cfg.validate();

  const auto probes = stream.probe_states();
  const int dim = family.param_dim();

  LifelongState state = make_initial_state(dim, cfg, tcfg);
  MemoryBuffer buffer;
  RunLog log;
  double kl_running = 0.0;

  for (int i = 1; i <= tcfg.K; ++i) {
    ParamMdp task = sample_task(stream, derive_seed(seed, stream::kTask, i));

    double reward = 0.0;
    if (algo == Algo::kSingleTask) {
      const std::uint64_t task_seed = derive_seed(seed, stream::kFineTune, task.content_hash());
      Eigen::VectorXd theta =
          fine_tune_family(Eigen::VectorXd::Zero(dim), task, family, tcfg.inner_steps,
                           tcfg.inner_batch, tcfg.inner_beta, task_seed);
      reward = evaluate_policy(task, family, theta, tcfg.eval_rollouts,
                               derive_seed(task_seed, stream::kEval));
    } else {
      Eigen::VectorXd theta = state.posterior.mu;
      if (algo == Algo::kEpicgFt && tcfg.inner_steps > 0) {
        theta = fine_tune_family(std::move(theta), task, family, tcfg.inner_steps,
                                 tcfg.inner_batch, tcfg.inner_beta,
                                 derive_seed(seed, stream::kFineTune, i));
      }
      reward = evaluate_policy(task, family, theta, tcfg.eval_rollouts,
                               derive_seed(seed, stream::kEval, i));
    }
    log.tasks.push_back({i, task.param_record(), reward, state.update_index});

    if (algo != Algo::kSingleTask) {
      state.tasks_seen = i;
      buffer.store(std::move(task), tcfg.N);
      if (i % tcfg.N == 0) {
        cfg.K_so_far = i;
        UpdateRecord rec;
        state = update_family(state, buffer, cfg, tcfg, family, probes,
                              derive_seed(seed, stream::kUpdate, state.update_index + 1), &rec);
        kl_running += rec.kl_step;
        rec.kl_running_sum = kl_running;
        log.updates.push_back(rec);
        log.snapshots.push_back(state.posterior);
      }
    }
  }
  log.final_posterior = state.posterior;
  log.final_prior = state.prior;
  return log;
}

MlpFamily make_mlp_family(const TaskDistribution& stream, const std::vector<int>& hidden) {
  std::vector<int> dims;
  dims.push_back(stream.state_dim());
  for (int h : hidden) dims.push_back(h);
  dims.push_back(stream.num_actions());
  return MlpFamily{std::make_shared<MlpGibbsPolicy>(dims, Activation::kTanh)};
}

}  // namespace

ReturnGradient estimate_return_gradient(const GaussianPolicyDistribution& posterior,
                                        const std::shared_ptr<const FeatureMap>& features,
                                        const std::vector<ParamMdp>& tasks, int draws,
                                        std::uint64_t seed,
                                        std::vector<std::vector<Trajectory>>* rollouts_out) {
  return estimate_gradient_family(posterior, LinearFamily{features}, tasks, draws, seed,
                                  rollouts_out);
}

LifelongState epicg_update(const LifelongState& state, MemoryBuffer& buffer,
                           const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                           const std::shared_ptr<const FeatureMap>& features,
                           const std::vector<Eigen::VectorXd>& probe_states, std::uint64_t seed,
                           UpdateRecord* record) {
  return update_family(state, buffer, cfg, tcfg, LinearFamily{features}, probe_states, seed,
                       record);
}

Eigen::VectorXd fine_tune(Eigen::VectorXd theta, const ParamMdp& task,
                          const std::shared_ptr<const FeatureMap>& features, int steps, int batch,
                          double step_size, std::uint64_t seed) {
  return fine_tune_family(std::move(theta), task, LinearFamily{features}, steps, batch, step_size,
                          seed);
}

RunLog run_lifelong(const TaskDistribution& stream, const RegularizerConfig& cfg,
                    const TrainingConfig& tcfg, std::uint64_t seed) {
  return run_stream(Algo::kEpicg, stream, LinearFamily{stream.default_features()}, cfg, tcfg,
                    seed);
}

RunLog epicg_ft(const TaskDistribution& stream, const RegularizerConfig& cfg,
                const TrainingConfig& tcfg, std::uint64_t seed) {
  if (tcfg.inner_steps < 0) throw std::invalid_argument("epicg_ft: inner_steps must be >= 0");
  return run_stream(Algo::kEpicgFt, stream, LinearFamily{stream.default_features()}, cfg, tcfg,
                    seed);
}

RunLog single_task_baseline(const TaskDistribution& stream, const RegularizerConfig& cfg,
                            const TrainingConfig& tcfg, std::uint64_t seed) {
  if (tcfg.inner_steps < 0)
    throw std::invalid_argument("single_task_baseline: inner_steps must be >= 0");
  return run_stream(Algo::kSingleTask, stream, LinearFamily{stream.default_features()}, cfg, tcfg,
                    seed);
}

RunLog run_lifelong_mlp(const TaskDistribution& stream, const std::vector<int>& hidden,
                        const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                        std::uint64_t seed) {
  return run_stream(Algo::kEpicg, stream, make_mlp_family(stream, hidden), cfg, tcfg, seed);
}

RunLog epicg_ft_mlp(const TaskDistribution& stream, const std::vector<int>& hidden,
                    const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                    std::uint64_t seed) {
  if (tcfg.inner_steps < 0) throw std::invalid_argument("epicg_ft: inner_steps must be >= 0");
  return run_stream(Algo::kEpicgFt, stream, make_mlp_family(stream, hidden), cfg, tcfg, seed);
}

RunLog single_task_baseline_mlp(const TaskDistribution& stream, const std::vector<int>& hidden,
                                const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                                std::uint64_t seed) {
  if (tcfg.inner_steps < 0)
    throw std::invalid_argument("single_task_baseline: inner_steps must be >= 0");
  return run_stream(Algo::kSingleTask, stream, make_mlp_family(stream, hidden), cfg, tcfg, seed);
}

PropositionCheck proposition1_check(const std::vector<std::vector<ParamMdp>>& window_tasks,
                                    const std::shared_ptr<const FeatureMap>& features,
                                    const std::vector<GaussianPolicyDistribution>& dists,
                                    int points_per_dim) {
  const int T = static_cast<int>(window_tasks.size());
  if (T < 1) throw std::invalid_argument("proposition1_check: need at least one window");
  if (static_cast<int>(dists.size()) < T)
    throw std::invalid_argument("proposition1_check: need a distribution per window");
  const int N = static_cast<int>(window_tasks.front().size());
  for (const auto& w : window_tasks)
    if (static_cast<int>(w.size()) != N)
      throw std::invalid_argument("proposition1_check: ragged window sizes");
  const int d = dists.front().dim();
  if (T * d > 4)
    throw std::invalid_argument("proposition1_check: joint dimension too large for quadrature");

  auto window_loss = [&](int l, const Eigen::VectorXd& theta) {
    double loss = 0.0;
    for (int i = 0; i < N; ++i)
      loss += -exact_expected_return(window_tasks[l][i], GibbsLinearPolicy(theta, features));
    return loss;
  };

  // Right side: each window integrates against its own marginal.
  double rhs = 0.0;
  for (int l = 0; l < T; ++l)
    rhs += gaussian_expectation(dists[l], points_per_dim,
                                [&](const Eigen::VectorXd& theta) { return window_loss(l, theta); });
  rhs /= static_cast<double>(T) * N;

  // Left side: one pass over the joint product measure of all windows.
  Eigen::VectorXd joint_mu(T * d), joint_sigma(T * d);
  for (int l = 0; l < T; ++l) {
    joint_mu.segment(l * d, d) = dists[l].mu;
    joint_sigma.segment(l * d, d) = dists[l].sigma;
  }
  const GaussianPolicyDistribution joint(joint_mu, joint_sigma);
  double lhs = gaussian_expectation(joint, points_per_dim, [&](const Eigen::VectorXd& theta_all) {
    double loss = 0.0;
    for (int l = 0; l < T; ++l) loss += window_loss(l, theta_all.segment(l * d, d));
    return loss;
  });
  lhs /= static_cast<double>(T) * N;

  return {lhs, rhs};
}

}  // namespace epic
