#ifndef MAZERL_PPO_HPP_
#define MAZERL_PPO_HPP_

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mazerl/maze_env.hpp"
#include "mazerl/policy.hpp"

namespace mazerl {

struct PPOConfig {
  double gamma = 0.999;
  double gae_lambda = 0.95;
  double learning_rate = 5e-4;
  int rollout_len = 256;
  int epochs_per_rollout = 3;
  int minibatches_per_epoch = 8;
  int minibatch_size = 0;  // 0: rollout_len * num_envs / minibatches_per_epoch
  double entropy_coef = 0.01;
  double clip_range = 0.2;
  double value_coef = 0.5;
  bool reward_normalization = true;
  double reward_clip = 10.0;
  int num_workers = 1;
  int envs_per_worker = 16;
  int64_t total_timesteps = 1000000;
  int64_t level_pool = 0;  // 0: unbounded distinct levels

  int num_envs() const { return num_workers * envs_per_worker; }
  int steps_per_iteration() const { return rollout_len * num_envs(); }
  int effective_minibatch_size() const {
    return minibatch_size > 0 ? minibatch_size : steps_per_iteration() / minibatches_per_epoch;
  }
  void validate() const;
};

// Scales rewards by the running standard deviation of discounted
// returns, then clips. Stateful across rollouts within one run.
class RewardNormalizer {
 public:
  RewardNormalizer() = default;
  RewardNormalizer(double gamma, double clip, bool enabled, int num_envs)
      : gamma_(gamma), clip_(clip), enabled_(enabled), returns_(num_envs, 0.0) {}

  double normalize(double reward, int env_index, bool done);

  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_) : 1.0; }
  bool enabled() const { return enabled_; }
  int64_t count() const { return count_; }

  // Variance statistics survive phase boundaries; per-env accumulators
  // restart with the fresh env set.
  void serialize(double& mean, double& m2, int64_t& count) const {
    mean = mean_;
    m2 = m2_;
    count = count_;
  }
  void restore(double mean, double m2, int64_t count) {
    mean_ = mean;
    m2_ = m2;
    count_ = count;
    std::fill(returns_.begin(), returns_.end(), 0.0);
  }

 private:
  double gamma_ = 0.999;
  double clip_ = 10.0;
  bool enabled_ = true;
  std::vector<double> returns_;
  int64_t count_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

// One rollout of experience from a set of parallel envs, stored
// step-major: index t * num_envs + e.
struct RolloutBuffer {
  int num_envs = 0;
  int len = 0;
  int obs_size = 0;

  std::vector<float> obs;         // [len*num_envs, obs_size]
  std::vector<uint8_t> actions;   // [len*num_envs]
  std::vector<float> logprobs;    // log pi_theta_old(a|s)
  std::vector<float> rewards;     // shaped + normalized, used by GAE
  std::vector<float> values;      // V(s_t)
  std::vector<uint8_t> dones;     // episode ended at this step
  std::vector<uint8_t> test_dist; // transition came from a TestAnywhere env
  std::vector<float> env_rewards; // raw environment reward component
  std::vector<float> rm_rewards;  // reward-model component (0 when unused)

  std::vector<float> advantages;
  std::vector<float> returns;

  int64_t size() const { return static_cast<int64_t>(len) * num_envs; }
  void allocate(int num_envs_, int len_, int obs_size_);
};

// GAE backward recursion over one env stream laid out with `stride`
// between consecutive timesteps. Return targets are advantage + value.
template <typename T>
void gae_recursion(const T* rewards, const T* values, const uint8_t* dones, T bootstrap_value,
                   double gamma, double gae_lambda, int len, int stride, T* advantages,
                   T* return_targets) {
  double carry = 0.0;
  for (int t = len - 1; t >= 0; --t) {
    const size_t i = static_cast<size_t>(t) * stride;
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_value = (t == len - 1) ? static_cast<double>(bootstrap_value)
                                             : static_cast<double>(values[i + stride]);
    const double delta = static_cast<double>(rewards[i]) + gamma * next_value * not_done -
                         static_cast<double>(values[i]);
    carry = delta + gamma * gae_lambda * not_done * carry;
    advantages[i] = static_cast<T>(carry);
    return_targets[i] = static_cast<T>(carry + static_cast<double>(values[i]));
  }
}

// GAE over a whole buffer. bootstrap_values are V(s_len) per env.
void compute_gae(RolloutBuffer& buffer, double gamma, double gae_lambda,
                 const std::vector<float>& bootstrap_values);

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// A gathered minibatch ready for the surrogate objective.
template <typename T>
struct MinibatchT {
  TensorT<T> obs;                // [M, planes, canvas, canvas]
  std::vector<uint8_t> actions;  // [M]
  std::vector<T> logprobs_old;
  std::vector<T> advantages;     // standardized by the caller
  std::vector<T> returns;
};
using Minibatch = MinibatchT<float>;

// Clipped-surrogate loss: -L^CLIP + value_coef * 0.5 * (V - target)^2
// - entropy_coef * H, mean-reduced. With compute_grads, parameter
// gradients are accumulated through the policy network.
template <typename T>
LossStats ppo_minibatch_loss(PolicyNetT<T>& net, const MinibatchT<T>& mb, double clip_range,
                             double value_coef, double entropy_coef, bool compute_grads) {
  const int n = mb.obs.dim(0);
  PolicyOutputT<T> out = net.forward(mb.obs);

  LossStats stats;
  TensorT<T> dlogits({n, kNumActions});
  TensorT<T> dvalues({n});
  const double inv_n = 1.0 / n;

  for (int i = 0; i < n; ++i) {
    double logp[kNumActions];
    log_softmax4(out.logits.ptr() + static_cast<size_t>(i) * kNumActions, logp);
    const int a = mb.actions[i];
    const double adv = static_cast<double>(mb.advantages[i]);
    const double ratio = std::exp(logp[a] - static_cast<double>(mb.logprobs_old[i]));
    const double unclipped = ratio * adv;
    const double clipped_ratio = std::min(std::max(ratio, 1.0 - clip_range), 1.0 + clip_range);
    const double clipped = clipped_ratio * adv;
    const double objective = std::min(unclipped, clipped);
    const bool clip_active = std::fabs(ratio - 1.0) > clip_range;

    const double h = entropy4(logp);
    const double v = static_cast<double>(out.values.data[i]);
    const double verr = v - static_cast<double>(mb.returns[i]);

    stats.policy += -objective * inv_n;
    stats.value += 0.5 * verr * verr * inv_n;
    stats.entropy += h * inv_n;
    stats.clip_fraction += (clip_active ? 1.0 : 0.0) * inv_n;

    if (compute_grads) {
      // d(-objective)/dlogp_a: the min picks the unclipped branch when
      // unclipped <= clipped; the clipped branch is constant in theta
      // outside the band and equals the unclipped branch inside it.
      const double dobj_dlp = (unclipped <= clipped) ? unclipped : 0.0;
      for (int k = 0; k < kNumActions; ++k) {
        const double p_k = std::exp(logp[k]);
        const double indicator = (k == a) ? 1.0 : 0.0;
        double g = -dobj_dlp * (indicator - p_k);              // policy term
        g += entropy_coef * p_k * (logp[k] + h);               // -coef * dH
        dlogits.data[static_cast<size_t>(i) * kNumActions + k] = static_cast<T>(g * inv_n);
      }
      dvalues.data[i] = static_cast<T>(value_coef * verr * inv_n);
    }
  }
  stats.total = stats.policy + value_coef * stats.value - entropy_coef * stats.entropy;
  if (compute_grads) net.backward(dlogits, dvalues);
  return stats;
}

// Per-transition shaping hook; the composite reward in the pipeline
// implements it. Batched across the env set for one timestep.
class TransitionReward {
 public:
  virtual ~TransitionReward() = default;
  virtual void shape(const std::vector<const Observation*>& prev,
                     const std::vector<const Observation*>& next,
                     const std::vector<double>& env_rewards, std::vector<double>& out,
                     std::vector<double>& rm_component) = 0;
};

struct TrainMetricsRow {
  int64_t timestep = 0;
  double mean_train_reward = 0.0;
  double mean_episode_length = 0.0;
  double policy_entropy = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const TrainMetricsRow& row);

class PPOTrainer {
 public:
  PPOTrainer(PPOConfig ppo, EnvConfig env_config, int canvas, uint64_t seed,
             PolicyArch arch = {});

  // Runs `steps` further environment timesteps (rounded down to whole
  // iterations). Metrics rows accumulate in order.
  void train(int64_t steps);

  void set_reward_source(std::shared_ptr<TransitionReward> source) { reward_source_ = source; }
  // Training asserts no TestAnywhere transition reaches an update.
  void set_forbid_test_data(bool v) { forbid_test_data_ = v; }

  PolicyNet& policy() { return *policy_; }
  Adam& optimizer() { return adam_; }
  RewardNormalizer& normalizer() { return normalizer_; }
  const std::vector<TrainMetricsRow>& metrics() const { return metrics_; }
  int64_t timesteps_done() const { return timesteps_done_; }
  const PPOConfig& config() const { return ppo_; }
  const EnvConfig& env_config() const { return env_config_; }
  int canvas() const { return canvas_; }

  void save_checkpoint(const std::string& path) const;
  // Restores policy weights, optimizer moments and normalizer
  // statistics; env streams restart from this trainer's seed.
  void load_checkpoint(const std::string& path);

  void reset_optimizer();

 private:
  void run_iteration();
  void collect(RolloutBuffer& buffer, std::vector<float>& bootstrap);
  LossStats update(const RolloutBuffer& buffer);
  uint64_t next_level_seed(int env_index);

  PPOConfig ppo_;
  EnvConfig env_config_;
  int canvas_;
  uint64_t seed_;
  std::unique_ptr<PolicyNet> policy_;
  Adam adam_;
  RewardNormalizer normalizer_;
  std::shared_ptr<TransitionReward> reward_source_;
  bool forbid_test_data_ = true;

  std::vector<MazeEnv> envs_;
  std::vector<Rng> action_rngs_;
  std::vector<Rng> level_rngs_;
  std::vector<int64_t> level_counters_;
  Rng update_rng_;

  std::vector<double> episode_returns_;  // raw env reward per live episode
  std::vector<int> episode_lengths_;

  int64_t timesteps_done_ = 0;
  std::vector<TrainMetricsRow> metrics_;
  double last_mean_reward_ = 0.0;
  double last_mean_length_ = 0.0;
};

// Loads only the policy weights from a trainer checkpoint.
void load_policy_weights(const std::string& path, PolicyNet& policy);

// Reconstructs a policy (canvas, seed, architecture) from checkpoint
// metadata and loads its weights.
std::unique_ptr<PolicyNet> make_policy_from_checkpoint(const std::string& path);

}  // namespace mazerl

#endif  // MAZERL_PPO_HPP_
