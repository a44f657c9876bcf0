#ifndef MAZERL_MAZE_ENV_HPP_
#define MAZERL_MAZE_ENV_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mazerl/rng.hpp"

namespace mazerl {

enum class Cell : uint8_t { Wall = 0, Open = 1 };

struct Pos {
  int row = 0;
  int col = 0;
  bool operator==(const Pos& o) const { return row == o.row && col == o.col; }
  bool operator!=(const Pos& o) const { return !(*this == o); }
};

// A perfect maze: the open cells form a spanning tree, so exactly one
// simple path exists between any two open cells. Border cells are wall.
struct MazeGrid {
  int width = 0;   // columns, odd, >= 3
  int height = 0;  // rows, odd, >= 3
  uint64_t seed = 0;
  std::vector<Cell> cells;  // row-major, height * width

  Cell at(int row, int col) const { return cells[static_cast<size_t>(row) * width + col]; }
  Cell& at(int row, int col) { return cells[static_cast<size_t>(row) * width + col]; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }
  bool open(int row, int col) const { return in_bounds(row, col) && at(row, col) == Cell::Open; }
  std::vector<Pos> open_cells() const;
};

enum class GoalMode { TrainRegion, TestAnywhere };

struct EnvConfig {
  int min_size = 9;   // odd
  int max_size = 13;  // odd
  int region_size = 1;
  GoalMode goal_mode = GoalMode::TrainRegion;
  int max_episode_steps = 256;
  uint64_t seed = 0;

  void validate() const;
};

enum class Action : uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kNumActions = 4;
inline constexpr double kGoalReward = 10.0;

struct EnvState {
  MazeGrid grid;
  Pos agent_pos;
  Pos cheese_pos;
  int step_count = 0;
  int max_episode_steps = 256;
  bool done = false;
};

// 4 binary planes (Wall, Open, Agent, Cheese) on a canvas x canvas
// grid, zero-padded beyond the maze extent.
struct Observation {
  int canvas = 0;
  std::vector<float> planes;  // 4 * canvas * canvas, values in {0, 1}

  float at(int plane, int row, int col) const {
    return planes[(static_cast<size_t>(plane) * canvas + row) * canvas + col];
  }
};
inline constexpr int kObsPlanes = 4;
inline constexpr int kPlaneWall = 0;
inline constexpr int kPlaneOpen = 1;
inline constexpr int kPlaneAgent = 2;
inline constexpr int kPlaneCheese = 3;

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  Observation observation;
};

// Randomized-Kruskal spanning tree carving over the odd-coordinate cell
// lattice. Identical (seed, width, height) produce bit-identical grids.
// Throws std::invalid_argument on even or sub-3 dimensions.
MazeGrid generate_maze(uint64_t seed, int width, int height);

// Goal placement. TestAnywhere: uniform over all open cells.
// TrainRegion with k >= 1: uniform over open cells in the k x k window
// anchored at the upper-right corner (rows [0,k), cols [width-k,width)),
// growing the window by 1 until it contains an open cell.
// TrainRegion with k == 0: the open cell nearest the exact upper-right
// corner (Manhattan), ties broken by smaller row then larger column.
Pos place_goal(const MazeGrid& grid, int region_size, GoalMode mode, Rng& rng);

// Fresh episode: maze dimensions uniform over odd sizes in
// [min_size, max_size] (square), cheese via place_goal, agent uniform
// over the remaining open cells. If the maze has a single open cell the
// agent starts on the cheese and the episode ends on the first step.
std::pair<EnvState, Observation> reset(const EnvConfig& config, uint64_t episode_seed);

// Deterministic dynamics: the agent moves one cell if the target is
// open, otherwise stays. Reward kGoalReward iff the new position is the
// cheese. Throws std::logic_error when called on a done state.
StepResult step(const EnvState& state, Action action, int canvas);

// Pure transition without observation encoding (used by rollout replay).
StepResult step_no_obs(const EnvState& state, Action action);

// Interior of the maze (outer wall ring stripped), "H W" header then
// H rows with legend '#' wall, '.' open, 'A' agent, 'C' cheese. When the
// agent sits on the cheese the cell renders 'A'.
std::string render_text(const EnvState& state);

// Inverse of render_text. Cheese is absent when the serialized state had
// the agent on the cheese. Throws std::invalid_argument on bad input.
struct ParsedMaze {
  MazeGrid grid;
  Pos agent_pos;
  std::optional<Pos> cheese_pos;
};
ParsedMaze parse_text(const std::string& text);

// Throws std::invalid_argument if the maze does not fit the canvas.
Observation encode_observation(const EnvState& state, int canvas);

// BFS shortest-path distance between two open cells, -1 if unreachable.
int shortest_path_distance(const MazeGrid& grid, Pos from, Pos to);

// The nominal k x k upper-right window grown until it contains an open
// cell; used both by place_goal and by corner-seeking evaluation.
struct Window {
  int rows = 0;  // rows [0, rows)
  int cols = 0;  // cols [width - cols, width)
  bool contains(const MazeGrid& grid, Pos p) const {
    return p.row >= 0 && p.row < rows && p.col >= grid.width - cols && p.col < grid.width;
  }
};
Window effective_corner_window(const MazeGrid& grid, int region_size);

// Convenience stateful wrapper used by rollout collection. One instance
// per execution context; all randomness comes from explicit seeds.
class MazeEnv {
 public:
  MazeEnv(EnvConfig config, int canvas) : config_(std::move(config)), canvas_(canvas) {
    config_.validate();
  }

  const Observation& reset_episode(uint64_t episode_seed);
  // Returns (reward, done); refreshes the cached observation.
  std::pair<double, bool> step_env(Action action);

  const EnvState& state() const { return state_; }
  const Observation& observation() const { return obs_; }
  const EnvConfig& config() const { return config_; }
  int canvas() const { return canvas_; }

 private:
  EnvConfig config_;
  int canvas_;
  EnvState state_;
  Observation obs_;
};

}  // namespace mazerl

#endif  // MAZERL_MAZE_ENV_HPP_
