#include "mazerl/rollout.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mazerl {

namespace {

std::string actions_to_string(const std::vector<Action>& actions) {
  static const char legend[] = {'U', 'D', 'L', 'R'};
  std::string out;
  out.reserve(actions.size());
  for (Action a : actions) out.push_back(legend[static_cast<int>(a)]);
  return out;
}

std::vector<Action> actions_from_string(const std::string& s) {
  std::vector<Action> out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case 'U': out.push_back(Action::Up); break;
      case 'D': out.push_back(Action::Down); break;
      case 'L': out.push_back(Action::Left); break;
      case 'R': out.push_back(Action::Right); break;
      default: throw std::invalid_argument("rollout: bad action character");
    }
  }
  return out;
}

std::string trajectory_to_string(const std::vector<Pos>& traj) {
  std::string out;
  for (size_t i = 0; i < traj.size(); ++i) {
    if (i) out.push_back(' ');
    out += "(" + std::to_string(traj[i].row) + "," + std::to_string(traj[i].col) + ")";
  }
  return out;
}

std::vector<Pos> trajectory_from_string(const std::string& s) {
  std::vector<Pos> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    Pos p;
    if (std::sscanf(tok.c_str(), "(%d,%d)", &p.row, &p.col) != 2)
      throw std::invalid_argument("rollout: bad trajectory token " + tok);
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<Rollout> sample_rollouts(PolicyNet& policy, const EnvConfig& env_config, int count,
                                     uint64_t seed, int canvas, SourcePhase phase,
                                     int64_t first_id) {
  std::vector<Rollout> out;
  out.reserve(static_cast<size_t>(count));
  Tensor batch({1, kObsPlanes, canvas, canvas});

  for (int i = 0; i < count; ++i) {
    MazeEnv env(env_config, canvas);
    env.reset_episode(derive_seed(derive_seed(seed, "sample_episode"), i));
    Rng action_rng(derive_seed(derive_seed(seed, "sample_actions"), i));

    Rollout r;
    r.id = first_id + i;
    r.maze_text = render_text(env.state());
    r.height = env.state().grid.height;
    r.width = env.state().grid.width;
    r.source_phase = phase;
    r.trajectory.push_back(env.state().agent_pos);
    r.observations.push_back(env.observation());

    bool done = env.state().done;
    double last_reward = 0.0;
    while (!done) {
      write_obs_row(batch, 0, env.observation());
      PolicyOutput pout = policy.forward(batch);
      const Action a = sample_action4(pout.logits.ptr(), action_rng);
      auto [reward, d] = env.step_env(a);
      r.actions.push_back(a);
      r.trajectory.push_back(env.state().agent_pos);
      r.observations.push_back(env.observation());
      last_reward = reward;
      done = d;
    }
    r.steps = static_cast<int>(r.actions.size());
    r.reached_goal = last_reward > 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

Rollout truncate(const Rollout& rollout, int max_steps) {
  if (rollout.steps <= max_steps) return rollout;
  Rollout out = rollout;
  out.actions.resize(static_cast<size_t>(max_steps));
  out.trajectory.resize(static_cast<size_t>(max_steps) + 1);
  if (!out.observations.empty()) out.observations.resize(static_cast<size_t>(max_steps) + 1);
  out.steps = max_steps;
  // Episodes end when the goal is reached, so a rollout longer than the
  // cut never reached it within the kept prefix.
  out.reached_goal = false;
  return out;
}

std::vector<RolloutPair> form_pairs(const std::vector<Rollout>& rollouts, int64_t max_pairs,
                                    uint64_t seed) {
  std::map<std::pair<int, int>, std::vector<int64_t>> groups;
  for (const Rollout& r : rollouts) groups[r.dims()].push_back(r.id);

  std::vector<RolloutPair> pairs;
  for (auto& [dims, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    for (size_t i = 0; i < ids.size(); ++i)
      for (size_t j = i + 1; j < ids.size(); ++j) {
        RolloutPair p;
        p.rollout_1 = ids[i];
        p.rollout_2 = ids[j];
        pairs.push_back(p);
      }
  }
  std::sort(pairs.begin(), pairs.end(), [](const RolloutPair& a, const RolloutPair& b) {
    return std::tie(a.rollout_1, a.rollout_2) < std::tie(b.rollout_1, b.rollout_2);
  });

  if (max_pairs > 0 && static_cast<int64_t>(pairs.size()) > max_pairs) {
    Rng rng(derive_seed(seed, "pair_subsample"));
    rng.shuffle(pairs);
    pairs.resize(static_cast<size_t>(max_pairs));
    std::sort(pairs.begin(), pairs.end(), [](const RolloutPair& a, const RolloutPair& b) {
      return std::tie(a.rollout_1, a.rollout_2) < std::tie(b.rollout_1, b.rollout_2);
    });
  }
  for (size_t i = 0; i < pairs.size(); ++i) pairs[i].id = static_cast<int64_t>(i);
  return pairs;
}

SplitSpec split_pairs(const std::vector<Rollout>& rollouts, const std::vector<RolloutPair>& pairs,
                      double val_fraction, uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction > 1.0)
    throw std::invalid_argument("val_fraction must be in [0, 1]");
  std::vector<int64_t> ids;
  for (const Rollout& r : rollouts) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());

  const auto n_val =
      static_cast<size_t>(std::llround(val_fraction * static_cast<double>(ids.size())));
  Rng rng(derive_seed(seed, "maze_split"));
  rng.shuffle(ids);

  SplitSpec spec;
  spec.val_rollouts.assign(ids.begin(), ids.begin() + static_cast<int64_t>(n_val));
  spec.train_rollouts.assign(ids.begin() + static_cast<int64_t>(n_val), ids.end());
  std::sort(spec.val_rollouts.begin(), spec.val_rollouts.end());
  std::sort(spec.train_rollouts.begin(), spec.train_rollouts.end());

  auto is_val = [&](int64_t id) {
    return std::binary_search(spec.val_rollouts.begin(), spec.val_rollouts.end(), id);
  };
  for (const RolloutPair& p : pairs) {
    if (is_val(p.rollout_1) || is_val(p.rollout_2))
      spec.val_pairs.push_back(p);
    else
      spec.train_pairs.push_back(p);
  }
  return spec;
}

void save_rollouts(const std::string& path, const std::vector<Rollout>& rollouts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("rollout store: cannot open " + path);
  for (const Rollout& r : rollouts) {
    nlohmann::json j = {
        {"id", r.id},
        {"maze", r.maze_text},
        {"h", r.height},
        {"w", r.width},
        {"trajectory", trajectory_to_string(r.trajectory)},
        {"actions", actions_to_string(r.actions)},
        {"reached_goal", r.reached_goal},
        {"steps", r.steps},
        {"phase", r.source_phase == SourcePhase::Initial ? "initial" : "deploy_sample"},
    };
    out << j.dump() << '\n';
  }
}

std::vector<Rollout> load_rollouts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("rollout store: cannot open " + path);
  std::vector<Rollout> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Rollout r;
    r.id = j.at("id").get<int64_t>();
    r.maze_text = j.at("maze").get<std::string>();
    r.height = j.at("h").get<int>();
    r.width = j.at("w").get<int>();
    r.trajectory = trajectory_from_string(j.at("trajectory").get<std::string>());
    r.actions = actions_from_string(j.at("actions").get<std::string>());
    r.reached_goal = j.at("reached_goal").get<bool>();
    r.steps = j.at("steps").get<int>();
    r.source_phase =
        j.at("phase").get<std::string>() == "initial" ? SourcePhase::Initial
                                                      : SourcePhase::DeploySample;
    out.push_back(std::move(r));
  }
  return out;
}

void save_observations(const std::string& path, const std::vector<Rollout>& rollouts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("rollout store: cannot open " + path);
  for (const Rollout& r : rollouts) {
    const uint64_t id = static_cast<uint64_t>(r.id);
    const uint32_t count = static_cast<uint32_t>(r.observations.size());
    const uint32_t canvas = count ? static_cast<uint32_t>(r.observations[0].canvas) : 0;
    out.write(reinterpret_cast<const char*>(&id), sizeof(id));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(&canvas), sizeof(canvas));
    std::vector<uint8_t> bytes;
    for (const Observation& obs : r.observations) {
      bytes.assign(obs.planes.size(), 0);
      for (size_t i = 0; i < obs.planes.size(); ++i) bytes[i] = obs.planes[i] > 0.5f ? 1 : 0;
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
  }
}

void load_observations(const std::string& path, std::vector<Rollout>& rollouts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("rollout store: cannot open " + path);
  std::map<int64_t, std::vector<Observation>> table;
  for (;;) {
    uint64_t id;
    uint32_t count, canvas;
    in.read(reinterpret_cast<char*>(&id), sizeof(id));
    if (!in) break;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    in.read(reinterpret_cast<char*>(&canvas), sizeof(canvas));
    std::vector<Observation> obs(count);
    const size_t plane_bytes = static_cast<size_t>(kObsPlanes) * canvas * canvas;
    std::vector<uint8_t> bytes(plane_bytes);
    for (uint32_t k = 0; k < count; ++k) {
      in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(plane_bytes));
      obs[k].canvas = static_cast<int>(canvas);
      obs[k].planes.resize(plane_bytes);
      for (size_t i = 0; i < plane_bytes; ++i) obs[k].planes[i] = bytes[i] ? 1.0f : 0.0f;
    }
    if (!in) throw std::runtime_error("rollout store: truncated observation file");
    table[static_cast<int64_t>(id)] = std::move(obs);
  }
  for (Rollout& r : rollouts) {
    auto it = table.find(r.id);
    if (it != table.end()) r.observations = std::move(it->second);
  }
}

bool replay_matches(const Rollout& rollout) {
  ParsedMaze parsed = parse_text(rollout.maze_text);
  EnvState state;
  state.grid = parsed.grid;
  state.agent_pos = parsed.agent_pos;
  state.cheese_pos = parsed.cheese_pos.value_or(parsed.agent_pos);
  state.max_episode_steps = std::max(rollout.steps + 1, 1);

  if (rollout.trajectory.size() != rollout.actions.size() + 1) return false;
  if (rollout.trajectory.front() != state.agent_pos) return false;

  bool reached = false;
  for (size_t i = 0; i < rollout.actions.size(); ++i) {
    StepResult r = step_no_obs(state, rollout.actions[i]);
    state = r.state;
    if (state.agent_pos != rollout.trajectory[i + 1]) return false;
    if (r.reward > 0.0) reached = true;
  }
  return reached == rollout.reached_goal &&
         rollout.steps == static_cast<int>(rollout.actions.size());
}

const Rollout& find_rollout(const std::vector<Rollout>& rollouts, int64_t id) {
  for (const Rollout& r : rollouts)
    if (r.id == id) return r;
  throw std::out_of_range("rollout id not found");
}

}  // namespace mazerl
