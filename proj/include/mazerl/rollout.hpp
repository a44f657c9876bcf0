#ifndef MAZERL_ROLLOUT_HPP_
#define MAZERL_ROLLOUT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mazerl/maze_env.hpp"
#include "mazerl/policy.hpp"

namespace mazerl {

enum class SourcePhase { Initial, DeploySample };

// One stored policy trajectory: the textual maze of the initial state,
// the coordinate path, the action log, and (optionally) the per-state
// observations used by reward-model training.
struct Rollout {
  int64_t id = 0;
  std::string maze_text;
  int height = 0, width = 0;  // full grid dimensions
  std::vector<Pos> trajectory;  // length == actions.size() + 1
  std::vector<Action> actions;
  bool reached_goal = false;
  int steps = 0;
  SourcePhase source_phase = SourcePhase::Initial;
  std::vector<Observation> observations;  // length == trajectory.size() when present

  std::pair<int, int> dims() const { return {height, width}; }
};

struct RolloutPair {
  int64_t id = 0;
  int64_t rollout_1 = 0;
  int64_t rollout_2 = 0;
  std::string constraint = "same_dims";
};

struct SplitSpec {
  std::vector<int64_t> train_rollouts;
  std::vector<int64_t> val_rollouts;
  std::vector<RolloutPair> train_pairs;
  std::vector<RolloutPair> val_pairs;
};

inline constexpr int kLabelTruncationSteps = 50;

// N complete episodes under the frozen policy with stochastic action
// sampling; deterministic given the seed. Observations are stored for
// every visited state.
std::vector<Rollout> sample_rollouts(PolicyNet& policy, const EnvConfig& env_config, int count,
                                     uint64_t seed, int canvas, SourcePhase phase,
                                     int64_t first_id = 0);

// First max_steps transitions kept; reached_goal recomputed on the
// prefix.
Rollout truncate(const Rollout& rollout, int max_steps = kLabelTruncationSteps);

// All unordered pairs within identical-dimension groups, ordered by
// (rollout_1, rollout_2) id. When the pair count exceeds max_pairs > 0,
// a uniform seeded subsample is kept (stable order).
std::vector<RolloutPair> form_pairs(const std::vector<Rollout>& rollouts, int64_t max_pairs = 0,
                                    uint64_t seed = 0);

// Maze-level split: val_fraction of rollouts (rounded) become
// validation; a pair is validation iff it touches a validation rollout.
SplitSpec split_pairs(const std::vector<Rollout>& rollouts, const std::vector<RolloutPair>& pairs,
                      double val_fraction, uint64_t seed);

// Line-delimited JSON records, one rollout per line; observations go to
// a sidecar binary file indexed by rollout id.
void save_rollouts(const std::string& path, const std::vector<Rollout>& rollouts);
std::vector<Rollout> load_rollouts(const std::string& path);
void save_observations(const std::string& path, const std::vector<Rollout>& rollouts);
void load_observations(const std::string& path, std::vector<Rollout>& rollouts);

// Independent replay: re-simulates the action log in the parsed maze
// and returns whether trajectory, steps and reached_goal all match.
bool replay_matches(const Rollout& rollout);

const Rollout& find_rollout(const std::vector<Rollout>& rollouts, int64_t id);

}  // namespace mazerl

#endif  // MAZERL_ROLLOUT_HPP_
