#include "mazerl/maze_env.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mazerl {

std::vector<Pos> MazeGrid::open_cells() const {
  std::vector<Pos> out;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (at(r, c) == Cell::Open) out.push_back({r, c});
  return out;
}

void EnvConfig::validate() const {
  if (min_size < 3 || min_size % 2 == 0 || max_size % 2 == 0)
    throw std::invalid_argument("maze sizes must be odd and >= 3");
  if (min_size > max_size) throw std::invalid_argument("min_size > max_size");
  if (region_size < 0 || region_size > 10)
    throw std::invalid_argument("region_size must be in [0, 10]");
  if (max_episode_steps < 1) throw std::invalid_argument("max_episode_steps must be >= 1");
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

MazeGrid generate_maze(uint64_t seed, int width, int height) {
  if (width < 3 || height < 3 || width % 2 == 0 || height % 2 == 0)
    throw std::invalid_argument("maze dimensions must be odd and >= 3");

  MazeGrid grid;
  grid.width = width;
  grid.height = height;
  grid.seed = seed;
  grid.cells.assign(static_cast<size_t>(width) * height, Cell::Wall);

  // Rooms sit on the odd-coordinate lattice.
  const int room_rows = (height - 1) / 2;
  const int room_cols = (width - 1) / 2;
  auto room_index = [room_cols](int rr, int rc) { return rr * room_cols + rc; };

  for (int rr = 0; rr < room_rows; ++rr)
    for (int rc = 0; rc < room_cols; ++rc) grid.at(2 * rr + 1, 2 * rc + 1) = Cell::Open;

  // Candidate walls between horizontally / vertically adjacent rooms.
  struct Edge {
    int room_a, room_b;
    Pos wall;
  };
  std::vector<Edge> edges;
  edges.reserve(static_cast<size_t>(room_rows) * room_cols * 2);
  for (int rr = 0; rr < room_rows; ++rr) {
    for (int rc = 0; rc < room_cols; ++rc) {
      if (rc + 1 < room_cols)
        edges.push_back({room_index(rr, rc), room_index(rr, rc + 1), {2 * rr + 1, 2 * rc + 2}});
      if (rr + 1 < room_rows)
        edges.push_back({room_index(rr, rc), room_index(rr + 1, rc), {2 * rr + 2, 2 * rc + 1}});
    }
  }

  Rng rng(derive_seed(seed, "maze_kruskal"));
  rng.shuffle(edges);

  UnionFind uf(room_rows * room_cols);
  for (const Edge& e : edges)
    if (uf.unite(e.room_a, e.room_b)) grid.at(e.wall.row, e.wall.col) = Cell::Open;

  return grid;
}

Pos place_goal(const MazeGrid& grid, int region_size, GoalMode mode, Rng& rng) {
  const std::vector<Pos> open = grid.open_cells();
  if (open.empty()) throw std::invalid_argument("maze has no open cells");

  if (mode == GoalMode::TestAnywhere)
    return open[rng.uniform_int(static_cast<uint32_t>(open.size()))];

  if (region_size == 0) {
    // Deterministic cell nearest the exact upper-right corner.
    const Pos corner{0, grid.width - 1};
    Pos best = open.front();
    int best_d = 1 << 30;
    for (const Pos& p : open) {
      int d = p.row + (corner.col - p.col);
      if (d < best_d || (d == best_d && (p.row < best.row || (p.row == best.row && p.col > best.col)))) {
        best = p;
        best_d = d;
      }
    }
    return best;
  }

  for (int k = region_size;; ++k) {
    std::vector<Pos> candidates;
    for (const Pos& p : open)
      if (p.row < k && p.col >= grid.width - k) candidates.push_back(p);
    if (!candidates.empty())
      return candidates[rng.uniform_int(static_cast<uint32_t>(candidates.size()))];
  }
}

Window effective_corner_window(const MazeGrid& grid, int region_size) {
  if (region_size == 0) {
    Rng unused(0);
    Pos p = place_goal(grid, 0, GoalMode::TrainRegion, unused);
    return Window{p.row + 1, grid.width - p.col};
  }
  for (int k = region_size;; ++k) {
    for (const Pos& p : grid.open_cells())
      if (p.row < k && p.col >= grid.width - k) return Window{k, k};
  }
}

std::pair<EnvState, Observation> reset(const EnvConfig& config, uint64_t episode_seed) {
  config.validate();

  Rng rng(derive_seed(derive_seed(config.seed, "episode"), episode_seed));

  int n_sizes = (config.max_size - config.min_size) / 2 + 1;
  int size = config.min_size + 2 * static_cast<int>(rng.uniform_int(static_cast<uint32_t>(n_sizes)));

  EnvState state;
  state.grid = generate_maze(rng.next_u64(), size, size);
  state.cheese_pos = place_goal(state.grid, config.region_size, config.goal_mode, rng);

  std::vector<Pos> starts;
  for (const Pos& p : state.grid.open_cells())
    if (p != state.cheese_pos) starts.push_back(p);
  state.agent_pos = starts.empty()
                        ? state.cheese_pos
                        : starts[rng.uniform_int(static_cast<uint32_t>(starts.size()))];

  state.step_count = 0;
  state.max_episode_steps = config.max_episode_steps;
  state.done = false;

  Observation obs = encode_observation(state, config.max_size);
  return {std::move(state), std::move(obs)};
}

namespace {

Pos move_target(Pos p, Action a) {
  switch (a) {
    case Action::Up: return {p.row - 1, p.col};
    case Action::Down: return {p.row + 1, p.col};
    case Action::Left: return {p.row, p.col - 1};
    case Action::Right: return {p.row, p.col + 1};
  }
  return p;
}

}  // namespace

StepResult step_no_obs(const EnvState& state, Action action) {
  if (state.done) throw std::logic_error("step called on a done state");

  StepResult result;
  result.state = state;

  Pos target = move_target(state.agent_pos, action);
  if (result.state.grid.open(target.row, target.col)) result.state.agent_pos = target;

  result.state.step_count = state.step_count + 1;
  bool reached = result.state.agent_pos == result.state.cheese_pos;
  result.reward = reached ? kGoalReward : 0.0;
  result.done = reached || result.state.step_count >= state.max_episode_steps;
  result.state.done = result.done;
  return result;
}

StepResult step(const EnvState& state, Action action, int canvas) {
  StepResult result = step_no_obs(state, action);
  result.observation = encode_observation(result.state, canvas);
  return result;
}

std::string render_text(const EnvState& state) {
  const MazeGrid& g = state.grid;
  const int ih = g.height - 2, iw = g.width - 2;
  std::string out = std::to_string(ih) + " " + std::to_string(iw) + "\n";
  for (int r = 1; r <= ih; ++r) {
    for (int c = 1; c <= iw; ++c) {
      Pos p{r, c};
      char ch = g.at(r, c) == Cell::Wall ? '#' : '.';
      if (p == state.cheese_pos) ch = 'C';
      if (p == state.agent_pos) ch = 'A';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

ParsedMaze parse_text(const std::string& text) {
  std::istringstream in(text);
  int ih = 0, iw = 0;
  if (!(in >> ih >> iw) || ih < 1 || iw < 1)
    throw std::invalid_argument("maze text: bad header");
  in.ignore();  // newline after header

  ParsedMaze parsed;
  parsed.grid.width = iw + 2;
  parsed.grid.height = ih + 2;
  parsed.grid.seed = 0;
  parsed.grid.cells.assign(static_cast<size_t>(parsed.grid.width) * parsed.grid.height,
                           Cell::Wall);

  std::optional<Pos> agent;
  for (int r = 0; r < ih; ++r) {
    std::string line;
    if (!std::getline(in, line) || static_cast<int>(line.size()) < iw)
      throw std::invalid_argument("maze text: short row");
    for (int c = 0; c < iw; ++c) {
      Pos p{r + 1, c + 1};
      switch (line[c]) {
        case '#': break;
        case '.': parsed.grid.at(p.row, p.col) = Cell::Open; break;
        case 'A':
          parsed.grid.at(p.row, p.col) = Cell::Open;
          agent = p;
          break;
        case 'C':
          parsed.grid.at(p.row, p.col) = Cell::Open;
          parsed.cheese_pos = p;
          break;
        default: throw std::invalid_argument("maze text: bad cell character");
      }
    }
  }
  if (!agent) throw std::invalid_argument("maze text: no agent");
  parsed.agent_pos = *agent;
  return parsed;
}

Observation encode_observation(const EnvState& state, int canvas) {
  const MazeGrid& g = state.grid;
  if (g.width > canvas || g.height > canvas)
    throw std::invalid_argument("maze larger than observation canvas");

  Observation obs;
  obs.canvas = canvas;
  obs.planes.assign(static_cast<size_t>(kObsPlanes) * canvas * canvas, 0.0f);
  auto set = [&](int plane, int r, int c) {
    obs.planes[(static_cast<size_t>(plane) * canvas + r) * canvas + c] = 1.0f;
  };

  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      set(g.at(r, c) == Cell::Wall ? kPlaneWall : kPlaneOpen, r, c);
  set(kPlaneAgent, state.agent_pos.row, state.agent_pos.col);
  set(kPlaneCheese, state.cheese_pos.row, state.cheese_pos.col);
  return obs;
}

int shortest_path_distance(const MazeGrid& grid, Pos from, Pos to) {
  if (!grid.open(from.row, from.col) || !grid.open(to.row, to.col)) return -1;
  if (from == to) return 0;
  std::vector<int> dist(grid.cells.size(), -1);
  auto idx = [&](Pos p) { return static_cast<size_t>(p.row) * grid.width + p.col; };
  std::deque<Pos> queue{from};
  dist[idx(from)] = 0;
  while (!queue.empty()) {
    Pos p = queue.front();
    queue.pop_front();
    for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
      Pos q = move_target(p, a);
      if (!grid.open(q.row, q.col) || dist[idx(q)] >= 0) continue;
      dist[idx(q)] = dist[idx(p)] + 1;
      if (q == to) return dist[idx(q)];
      queue.push_back(q);
    }
  }
  return -1;
}

const Observation& MazeEnv::reset_episode(uint64_t episode_seed) {
  auto [state, obs] = reset(config_, episode_seed);
  state_ = std::move(state);
  obs_ = encode_observation(state_, canvas_);
  return obs_;
}

std::pair<double, bool> MazeEnv::step_env(Action action) {
  StepResult r = step(state_, action, canvas_);
  state_ = std::move(r.state);
  obs_ = std::move(r.observation);
  return {r.reward, r.done};
}

}  // namespace mazerl
