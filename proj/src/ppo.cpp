#include "mazerl/ppo.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mazerl/checkpoint.hpp"

namespace mazerl {

void PPOConfig::validate() const {
  if (gamma <= 0 || gamma > 1) throw std::invalid_argument("gamma must be in (0, 1]");
  if (gae_lambda < 0 || gae_lambda > 1) throw std::invalid_argument("gae_lambda must be in [0, 1]");
  if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
  if (rollout_len < 1 || epochs_per_rollout < 1 || minibatches_per_epoch < 1)
    throw std::invalid_argument("rollout structure values must be positive");
  if (clip_range <= 0 || clip_range >= 1) throw std::invalid_argument("clip_range must be in (0, 1)");
  if (num_workers < 1 || envs_per_worker < 1)
    throw std::invalid_argument("worker/env counts must be positive");
  if (effective_minibatch_size() < 1 ||
      static_cast<int64_t>(effective_minibatch_size()) * minibatches_per_epoch >
          static_cast<int64_t>(rollout_len) * num_envs())
    throw std::invalid_argument("minibatch partition exceeds the rollout");
}

double RewardNormalizer::normalize(double reward, int env_index, bool done) {
  if (!enabled_) return reward;
  double& ret = returns_[static_cast<size_t>(env_index)];
  ret = ret * gamma_ + reward;
  ++count_;
  const double delta = ret - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (ret - mean_);
  if (done) ret = 0.0;
  const double stddev = std::sqrt(variance() + 1e-8);
  double shaped = reward / stddev;
  return std::min(std::max(shaped, -clip_), clip_);
}

void RolloutBuffer::allocate(int num_envs_, int len_, int obs_size_) {
  num_envs = num_envs_;
  len = len_;
  obs_size = obs_size_;
  const size_t n = static_cast<size_t>(len) * num_envs;
  obs.assign(n * obs_size, 0.0f);
  actions.assign(n, 0);
  logprobs.assign(n, 0.0f);
  rewards.assign(n, 0.0f);
  values.assign(n, 0.0f);
  dones.assign(n, 0);
  test_dist.assign(n, 0);
  env_rewards.assign(n, 0.0f);
  rm_rewards.assign(n, 0.0f);
  advantages.assign(n, 0.0f);
  returns.assign(n, 0.0f);
}

void compute_gae(RolloutBuffer& b, double gamma, double gae_lambda,
                 const std::vector<float>& bootstrap_values) {
  if (static_cast<int>(bootstrap_values.size()) != b.num_envs)
    throw std::invalid_argument("gae: bootstrap size mismatch");
  for (int e = 0; e < b.num_envs; ++e)
    gae_recursion(b.rewards.data() + e, b.values.data() + e, b.dones.data() + e,
                  bootstrap_values[e], gamma, gae_lambda, b.len, b.num_envs,
                  b.advantages.data() + e, b.returns.data() + e);
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string metrics_csv_header() {
  return "timestep,mean_train_reward,mean_episode_length,policy_entropy,value_loss,clip_fraction";
}

std::string metrics_csv_row(const TrainMetricsRow& r) {
  std::ostringstream out;
  out << r.timestep << ',' << format_double(r.mean_train_reward) << ','
      << format_double(r.mean_episode_length) << ',' << format_double(r.policy_entropy) << ','
      << format_double(r.value_loss) << ',' << format_double(r.clip_fraction);
  return out.str();
}

PPOTrainer::PPOTrainer(PPOConfig ppo, EnvConfig env_config, int canvas, uint64_t seed,
                       PolicyArch arch)
    : ppo_(ppo),
      env_config_(env_config),
      canvas_(canvas),
      seed_(seed),
      update_rng_(derive_seed(seed, "ppo_update")) {
  ppo_.validate();
  env_config_.validate();
  policy_ = std::make_unique<PolicyNet>(canvas, derive_seed(seed, "policy_init"), arch);
  adam_ = Adam(policy_->params(), ppo_.learning_rate);
  normalizer_ = RewardNormalizer(ppo_.gamma, ppo_.reward_clip, ppo_.reward_normalization,
                                 ppo_.num_envs());

  const int n = ppo_.num_envs();
  envs_.reserve(n);
  episode_returns_.assign(n, 0.0);
  episode_lengths_.assign(n, 0);
  for (int e = 0; e < n; ++e) {
    envs_.emplace_back(env_config_, canvas_);
    action_rngs_.emplace_back(derive_seed(derive_seed(seed, "actions"), e));
    level_rngs_.emplace_back(derive_seed(derive_seed(seed, "levels"), e));
    level_counters_.push_back(0);
  }
  for (int e = 0; e < n; ++e) envs_[e].reset_episode(next_level_seed(e));
}

uint64_t PPOTrainer::next_level_seed(int env_index) {
  Rng& rng = level_rngs_[static_cast<size_t>(env_index)];
  if (ppo_.level_pool > 0)
    return static_cast<uint64_t>(rng.next_u64() % static_cast<uint64_t>(ppo_.level_pool));
  // Distinct stream per env; counters keep seeds unique without reuse.
  (void)level_counters_;
  return rng.next_u64();
}

void PPOTrainer::collect(RolloutBuffer& buffer, std::vector<float>& bootstrap) {
  const int n_envs = ppo_.num_envs();
  const int obs_size = kObsPlanes * canvas_ * canvas_;
  buffer.allocate(n_envs, ppo_.rollout_len, obs_size);

  Tensor batch({n_envs, kObsPlanes, canvas_, canvas_});
  std::vector<Observation> prev_obs(n_envs);
  std::vector<double> env_rewards(n_envs), shaped(n_envs), rm_component(n_envs);
  std::vector<const Observation*> prev_ptrs(n_envs), next_ptrs(n_envs);
  std::vector<Observation> next_obs(n_envs);

  std::vector<double> completed_returns;
  std::vector<int> completed_lengths;

  for (int t = 0; t < ppo_.rollout_len; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      prev_obs[e] = envs_[e].observation();
      write_obs_row(batch, e, prev_obs[e]);
    }
    PolicyOutput out = policy_->forward(batch);

    std::vector<bool> dones(n_envs);
    for (int e = 0; e < n_envs; ++e) {
      const size_t i = static_cast<size_t>(t) * n_envs + e;
      double logp[kNumActions];
      log_softmax4(out.logits.ptr() + static_cast<size_t>(e) * kNumActions, logp);
      const Action a = sample_action4(out.logits.ptr() + static_cast<size_t>(e) * kNumActions,
                                      action_rngs_[e]);
      auto [reward, done] = envs_[e].step_env(a);
      next_obs[e] = envs_[e].observation();  // terminal obs before any reset

      std::copy(prev_obs[e].planes.begin(), prev_obs[e].planes.end(),
                buffer.obs.begin() + static_cast<int64_t>(i) * obs_size);
      buffer.actions[i] = static_cast<uint8_t>(a);
      buffer.logprobs[i] = static_cast<float>(logp[static_cast<int>(a)]);
      buffer.values[i] = static_cast<float>(out.values.data[e]);
      buffer.dones[i] = done ? 1 : 0;
      buffer.test_dist[i] = envs_[e].config().goal_mode == GoalMode::TestAnywhere ? 1 : 0;
      env_rewards[e] = reward;
      dones[e] = done;

      episode_returns_[e] += reward;
      episode_lengths_[e] += 1;
    }

    if (reward_source_) {
      for (int e = 0; e < n_envs; ++e) {
        prev_ptrs[e] = &prev_obs[e];
        next_ptrs[e] = &next_obs[e];
      }
      reward_source_->shape(prev_ptrs, next_ptrs, env_rewards, shaped, rm_component);
    } else {
      shaped = env_rewards;
      std::fill(rm_component.begin(), rm_component.end(), 0.0);
    }

    for (int e = 0; e < n_envs; ++e) {
      const size_t i = static_cast<size_t>(t) * n_envs + e;
      buffer.env_rewards[i] = static_cast<float>(env_rewards[e]);
      buffer.rm_rewards[i] = static_cast<float>(rm_component[e]);
      buffer.rewards[i] = static_cast<float>(normalizer_.normalize(shaped[e], e, dones[e]));
      if (dones[e]) {
        completed_returns.push_back(episode_returns_[e]);
        completed_lengths.push_back(episode_lengths_[e]);
        episode_returns_[e] = 0.0;
        episode_lengths_[e] = 0;
        envs_[e].reset_episode(next_level_seed(e));
      }
    }
  }

  for (int e = 0; e < n_envs; ++e) write_obs_row(batch, e, envs_[e].observation());
  PolicyOutput out = policy_->forward(batch);
  bootstrap.resize(n_envs);
  for (int e = 0; e < n_envs; ++e)
    bootstrap[e] = envs_[e].state().done ? 0.0f : static_cast<float>(out.values.data[e]);

  if (!completed_returns.empty()) {
    last_mean_reward_ =
        std::accumulate(completed_returns.begin(), completed_returns.end(), 0.0) /
        static_cast<double>(completed_returns.size());
    last_mean_length_ =
        std::accumulate(completed_lengths.begin(), completed_lengths.end(), 0.0) /
        static_cast<double>(completed_lengths.size());
  }
}

LossStats PPOTrainer::update(const RolloutBuffer& buffer) {
  const int64_t n = buffer.size();
  const int mb_size = ppo_.effective_minibatch_size();

  if (forbid_test_data_)
    for (int64_t i = 0; i < n; ++i)
      if (buffer.test_dist[i])
        throw std::logic_error("zero-shot violation: test-distribution transition in update");

  std::vector<int64_t> indices(static_cast<size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);

  LossStats mean_stats;
  int stat_count = 0;
  const int obs_size = buffer.obs_size;

  for (int epoch = 0; epoch < ppo_.epochs_per_rollout; ++epoch) {
    update_rng_.shuffle(indices);
    for (int mb = 0; mb < ppo_.minibatches_per_epoch; ++mb) {
      Minibatch batch;
      batch.obs = Tensor({mb_size, kObsPlanes, canvas_, canvas_});
      batch.actions.resize(mb_size);
      batch.logprobs_old.resize(mb_size);
      batch.advantages.resize(mb_size);
      batch.returns.resize(mb_size);

      double adv_mean = 0.0;
      for (int j = 0; j < mb_size; ++j) {
        const int64_t src = indices[static_cast<size_t>(mb) * mb_size + j];
        std::copy(buffer.obs.begin() + src * obs_size, buffer.obs.begin() + (src + 1) * obs_size,
                  batch.obs.data.begin() + static_cast<int64_t>(j) * obs_size);
        batch.actions[j] = buffer.actions[src];
        batch.logprobs_old[j] = buffer.logprobs[src];
        batch.advantages[j] = buffer.advantages[src];
        batch.returns[j] = buffer.returns[src];
        adv_mean += buffer.advantages[src];
      }
      adv_mean /= mb_size;
      double adv_var = 0.0;
      for (int j = 0; j < mb_size; ++j) {
        const double d = batch.advantages[j] - adv_mean;
        adv_var += d * d;
      }
      const double adv_std = std::sqrt(adv_var / mb_size) + 1e-8;
      for (int j = 0; j < mb_size; ++j)
        batch.advantages[j] = static_cast<float>((batch.advantages[j] - adv_mean) / adv_std);

      policy_->zero_grad();
      LossStats stats = ppo_minibatch_loss(*policy_, batch, ppo_.clip_range, ppo_.value_coef,
                                           ppo_.entropy_coef, true);
      if (!std::isfinite(stats.total)) {
        std::ostringstream msg;
        msg << "ppo: non-finite loss at timestep " << timesteps_done_ << " (policy=" << stats.policy
            << " value=" << stats.value << " entropy=" << stats.entropy << ")";
        throw std::runtime_error(msg.str());
      }
      adam_.step(policy_->params(), policy_->grads());

      mean_stats.total += stats.total;
      mean_stats.policy += stats.policy;
      mean_stats.value += stats.value;
      mean_stats.entropy += stats.entropy;
      mean_stats.clip_fraction += stats.clip_fraction;
      ++stat_count;
    }
  }

  mean_stats.total /= stat_count;
  mean_stats.policy /= stat_count;
  mean_stats.value /= stat_count;
  mean_stats.entropy /= stat_count;
  mean_stats.clip_fraction /= stat_count;
  return mean_stats;
}

void PPOTrainer::run_iteration() {
  RolloutBuffer buffer;
  std::vector<float> bootstrap;
  collect(buffer, bootstrap);
  compute_gae(buffer, ppo_.gamma, ppo_.gae_lambda, bootstrap);
  LossStats stats = update(buffer);
  timesteps_done_ += buffer.size();

  TrainMetricsRow row;
  row.timestep = timesteps_done_;
  row.mean_train_reward = last_mean_reward_;
  row.mean_episode_length = last_mean_length_;
  row.policy_entropy = stats.entropy;
  row.value_loss = stats.value;
  row.clip_fraction = stats.clip_fraction;
  metrics_.push_back(row);
}

void PPOTrainer::train(int64_t steps) {
  const int64_t per_iter = ppo_.steps_per_iteration();
  const int64_t iterations = steps / per_iter;
  for (int64_t i = 0; i < iterations; ++i) run_iteration();
}

void PPOTrainer::reset_optimizer() { adam_ = Adam(policy_->params(), ppo_.learning_rate); }

void PPOTrainer::save_checkpoint(const std::string& path) const {
  Checkpoint ckpt;
  auto* self = const_cast<PPOTrainer*>(this);
  auto params = self->policy_->params();
  for (size_t i = 0; i < params.size(); ++i)
    ckpt.add("policy." + std::to_string(i), params[i]->data);
  add_adam(ckpt, "adam", self->adam_);

  double mean, m2;
  int64_t count;
  normalizer_.serialize(mean, m2, count);
  ckpt.meta["normalizer"] = {{"mean", mean}, {"m2", m2}, {"count", count}};
  ckpt.meta["policy"] = {{"canvas", canvas_},
                         {"seed", policy_->seed()},
                         {"arch",
                          {{"conv1", policy_->arch().conv1},
                           {"conv2", policy_->arch().conv2},
                           {"conv3", policy_->arch().conv3},
                           {"dense", policy_->arch().dense}}}};
  ckpt.meta["timesteps_done"] = timesteps_done_;
  ckpt.save(path);
}

void PPOTrainer::load_checkpoint(const std::string& path) {
  Checkpoint ckpt = Checkpoint::load(path);
  auto params = policy_->params();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& data = ckpt.get("policy." + std::to_string(i));
    if (data.size() != params[i]->data.size())
      throw std::runtime_error("checkpoint: policy shape mismatch");
    params[i]->data = data;
  }
  load_adam(ckpt, "adam", adam_);
  const auto& n = ckpt.meta.at("normalizer");
  normalizer_.restore(n.at("mean").get<double>(), n.at("m2").get<double>(),
                      n.at("count").get<int64_t>());
  timesteps_done_ = ckpt.meta.value("timesteps_done", int64_t{0});
}

// Loads only policy weights from a trainer checkpoint.
void load_policy_weights(const std::string& path, PolicyNet& policy) {
  Checkpoint ckpt = Checkpoint::load(path);
  auto params = policy.params();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& data = ckpt.get("policy." + std::to_string(i));
    if (data.size() != params[i]->data.size())
      throw std::runtime_error("checkpoint: policy shape mismatch");
    params[i]->data = data;
  }
}

}  // namespace mazerl
