#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <vector>

#include "epic/envs.hpp"
#include "epic/pacbayes.hpp"
#include "epic/policy.hpp"

namespace epic {

// Hyperparameters of the lifelong loops that are not bound constants.
struct TrainingConfig {
  int K = 200;              // tasks in the stream
  int N = 25;               // tasks per update window
  int M = 5;                // policy draws per update
  double beta = 1e-4;       // step size on (mu, log sigma)
  double sigma_init = 0.1;  // initial posterior/prior std
  double grad_clip = 10.0;  // global-norm clip before the step
  int inner_steps = 0;      // per-task fine-tune / baseline iterations
  int inner_batch = 4;      // rollouts per fine-tune iteration
  double inner_beta = 0.1;  // fine-tune step size on theta
  int eval_rollouts = 1;    // rollouts averaged into the reported reward
};

// Tasks held for the current window; trajectories live only inside an update.
struct MemoryBuffer {
  std::vector<ParamMdp> tasks;
  std::vector<std::vector<Trajectory>> trajectories;  // [task][draw]

  void store(ParamMdp task, int capacity);
  void clear();
};

struct LifelongState {
  GaussianPolicyDistribution posterior;
  GaussianPolicyDistribution prior;
  double lambda_now = 0.9;
  int update_index = 0;  // l, updates completed
  int tasks_seen = 0;    // i
};

LifelongState make_initial_state(int dim, const RegularizerConfig& cfg,
                                 const TrainingConfig& tcfg);

struct TaskRecord {
  int task_index = 0;
  std::vector<std::pair<std::string, double>> params;
  double reward = 0.0;
  int update_index = 0;  // updates completed when the task was evaluated
};

struct UpdateRecord {
  int update_index = 0;
  int tasks_seen = 0;
  double kl_step = 0.0;         // KL(P_l || prior_l) after the update completes
  double kl_running_sum = 0.0;  // sum of kl_step over updates so far
  double kl_budget_ceiling = 0.0;
  double regularizer_value = 0.0;  // the regularizer used inside this update
  double bound_value = 0.0;        // theorem-1 diagnostic at K = tasks_seen
  double r_hat_step = 0.0;         // Pinsker proxy for TV(P_l, P_{l-1})
  double s_min_hat = 0.0;
  double mean_training_return = 0.0;
  bool premise_ok = true;  // r_hat_step <= cfg.r
  bool aborted = false;    // non-finite gradient, state kept
};

struct RunLog {
  std::vector<TaskRecord> tasks;
  std::vector<UpdateRecord> updates;
  std::vector<GaussianPolicyDistribution> snapshots;
  GaussianPolicyDistribution final_posterior;
  GaussianPolicyDistribution final_prior;

  // Mean over updates of the negative per-window mean return.
  double training_error() const;
  double mean_reward_over(int first_task, int last_task) const;  // inclusive, 1-based
};

// Monte-Carlo gradient of the return term under theta ~ posterior, summed
// over the window's tasks and averaged over the draws: REINFORCE with
// reward-to-go and a per-step leave-one-out mean baseline, chained through
// theta = mu + sigma (.) eps onto (mu, log sigma).
struct ReturnGradient {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_sigma;
  double mean_return = 0.0;
};

ReturnGradient estimate_return_gradient(const GaussianPolicyDistribution& posterior,
                                        const std::shared_ptr<const FeatureMap>& features,
                                        const std::vector<ParamMdp>& tasks, int draws,
                                        std::uint64_t seed,
                                        std::vector<std::vector<Trajectory>>* rollouts_out = nullptr);

// One EPICG update: gradient step on (mu, log sigma), prior evolution, lambda
// decay, buffer emptied. cfg.K_so_far must be the task count at this update.
LifelongState epicg_update(const LifelongState& state, MemoryBuffer& buffer,
                           const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                           const std::shared_ptr<const FeatureMap>& features,
                           const std::vector<Eigen::VectorXd>& probe_states, std::uint64_t seed,
                           UpdateRecord* record = nullptr);

RunLog run_lifelong(const TaskDistribution& stream, const RegularizerConfig& cfg,
                    const TrainingConfig& tcfg, std::uint64_t seed);

// Same stream, but each task's reported reward comes from a copy of the
// posterior mean fine-tuned on that task alone; the world policy is untouched.
RunLog epicg_ft(const TaskDistribution& stream, const RegularizerConfig& cfg,
                const TrainingConfig& tcfg, std::uint64_t seed);

// Fresh policy per task, trained from scratch; no world policy, no transfer.
// Per-task randomness depends on the task content, not its position.
RunLog single_task_baseline(const TaskDistribution& stream, const RegularizerConfig& cfg,
                            const TrainingConfig& tcfg, std::uint64_t seed);

// Opt-in MLP variants: the same loops run over the packed weights of a small
// tanh network (hidden layer sizes given) instead of the linear Gibbs policy.
RunLog run_lifelong_mlp(const TaskDistribution& stream, const std::vector<int>& hidden,
                        const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                        std::uint64_t seed);
RunLog epicg_ft_mlp(const TaskDistribution& stream, const std::vector<int>& hidden,
                    const RegularizerConfig& cfg, const TrainingConfig& tcfg, std::uint64_t seed);
RunLog single_task_baseline_mlp(const TaskDistribution& stream, const std::vector<int>& hidden,
                                const RegularizerConfig& cfg, const TrainingConfig& tcfg,
                                std::uint64_t seed);

// Per-task REINFORCE on a fixed task (ascent on return).
Eigen::VectorXd fine_tune(Eigen::VectorXd theta, const ParamMdp& task,
                          const std::shared_ptr<const FeatureMap>& features, int steps, int batch,
                          double step_size, std::uint64_t seed);

// Both sides of the training-error decomposition, each via its own quadrature
// route over the window posteriors; tabular tasks only.
struct PropositionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

PropositionCheck proposition1_check(const std::vector<std::vector<ParamMdp>>& window_tasks,
                                    const std::shared_ptr<const FeatureMap>& features,
                                    const std::vector<GaussianPolicyDistribution>& dists,
                                    int points_per_dim);

}  // namespace epic
