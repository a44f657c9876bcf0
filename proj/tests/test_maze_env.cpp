#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "mazerl/maze_env.hpp"

using namespace mazerl;

namespace {

// Independent connectivity oracle: BFS over open cells.
int bfs_component_size(const MazeGrid& g, Pos start) {
  std::set<std::pair<int, int>> seen;
  std::vector<Pos> stack{start};
  seen.insert({start.row, start.col});
  while (!stack.empty()) {
    Pos p = stack.back();
    stack.pop_back();
    const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
    for (int i = 0; i < 4; ++i) {
      Pos q{p.row + dr[i], p.col + dc[i]};
      if (g.open(q.row, q.col) && seen.insert({q.row, q.col}).second) stack.push_back(q);
    }
  }
  return static_cast<int>(seen.size());
}

// Edge count of the open-cell adjacency graph. A connected graph is a
// tree iff edges == vertices - 1, which is the unique-path property.
int open_graph_edges(const MazeGrid& g) {
  int edges = 0;
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      if (g.open(r, c)) {
        if (g.open(r, c + 1)) ++edges;
        if (g.open(r + 1, c)) ++edges;
      }
  return edges;
}

void check_perfect_maze(const MazeGrid& g) {
  auto open = g.open_cells();
  REQUIRE(!open.empty());
  CHECK(bfs_component_size(g, open.front()) == static_cast<int>(open.size()));
  CHECK(open_graph_edges(g) == static_cast<int>(open.size()) - 1);
  for (int r = 0; r < g.height; ++r) {
    CHECK(g.at(r, 0) == Cell::Wall);
    CHECK(g.at(r, g.width - 1) == Cell::Wall);
  }
  for (int c = 0; c < g.width; ++c) {
    CHECK(g.at(0, c) == Cell::Wall);
    CHECK(g.at(g.height - 1, c) == Cell::Wall);
  }
}

EnvState state_from_parsed(const ParsedMaze& p) {
  EnvState s;
  s.grid = p.grid;
  s.agent_pos = p.agent_pos;
  s.cheese_pos = p.cheese_pos.value_or(p.agent_pos);
  s.max_episode_steps = 256;
  return s;
}

}  // namespace

TEST_CASE("generate_maze: smallest case has a single connected open region") {
  MazeGrid g = generate_maze(7, 3, 3);
  check_perfect_maze(g);
  CHECK(g.open_cells().size() == 1);
  CHECK(g.at(1, 1) == Cell::Open);
}

TEST_CASE("generate_maze: BFS visits every open cell (seed 42, 9x9)") {
  MazeGrid g = generate_maze(42, 9, 9);
  auto open = g.open_cells();
  for (const Pos& p : open) CHECK(bfs_component_size(g, p) == static_cast<int>(open.size()));
}

TEST_CASE("generate_maze: deterministic for identical seed and dimensions") {
  MazeGrid a = generate_maze(42, 9, 9);
  MazeGrid b = generate_maze(42, 9, 9);
  CHECK(a.cells == b.cells);
  MazeGrid c = generate_maze(43, 9, 9);
  CHECK(a.cells != c.cells);
}

TEST_CASE("generate_maze: rejects even or sub-3 dimensions") {
  CHECK_THROWS_AS(generate_maze(0, 8, 9), std::invalid_argument);
  CHECK_THROWS_AS(generate_maze(0, 9, 8), std::invalid_argument);
  CHECK_THROWS_AS(generate_maze(0, 1, 9), std::invalid_argument);
}

TEST_CASE("maze property sweep: spanning tree + connectivity over random seeds") {
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    int w = 3 + 2 * static_cast<int>(rng.uniform_int(8));
    int h = 3 + 2 * static_cast<int>(rng.uniform_int(8));
    check_perfect_maze(generate_maze(rng.next_u64(), w, h));
  }
}

TEST_CASE("place_goal: k=0 is deterministic") {
  MazeGrid g = generate_maze(11, 11, 11);
  Rng r1(1), r2(99);
  Pos a = place_goal(g, 0, GoalMode::TrainRegion, r1);
  Pos b = place_goal(g, 0, GoalMode::TrainRegion, r2);
  CHECK(a == b);
  // Nearest open cell to the upper-right corner of an 11x11 bordered
  // maze is the room at (1, 9).
  CHECK(a == Pos{1, 9});
}

TEST_CASE("place_goal: singleton window when the corner cell is open") {
  // Hand-built grid with an open upper-right corner cell.
  MazeGrid g;
  g.width = 5;
  g.height = 5;
  g.cells.assign(25, Cell::Open);
  Rng rng(7);
  Pos p = place_goal(g, 1, GoalMode::TrainRegion, rng);
  CHECK(p == Pos{0, 4});
}

TEST_CASE("place_goal: k=1 on a bordered maze grows the window to the corner room") {
  MazeGrid g = generate_maze(3, 9, 9);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) CHECK(place_goal(g, 1, GoalMode::TrainRegion, rng) == Pos{1, 7});
}

TEST_CASE("place_goal: TestAnywhere is uniform over open cells (chi-square)") {
  MazeGrid g = generate_maze(42, 9, 9);
  auto open = g.open_cells();
  std::map<std::pair<int, int>, int> counts;
  Rng rng(77);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Pos p = place_goal(g, 0, GoalMode::TestAnywhere, rng);
    counts[{p.row, p.col}]++;
  }
  CHECK(counts.size() == open.size());
  // Chi-square statistic against uniform; 3-sigma bound for k-1 dof.
  double expected = static_cast<double>(draws) / open.size();
  double chi2 = 0.0;
  for (const Pos& p : open) {
    double diff = counts[{p.row, p.col}] - expected;
    chi2 += diff * diff / expected;
  }
  double dof = static_cast<double>(open.size()) - 1.0;
  CHECK(chi2 < dof + 3.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("reset: determinism and configured distributions") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 13;
  cfg.region_size = 1;
  cfg.seed = 11;

  auto [s1, o1] = reset(cfg, 4);
  auto [s2, o2] = reset(cfg, 4);
  CHECK(s1.grid.cells == s2.grid.cells);
  CHECK(s1.agent_pos == s2.agent_pos);
  CHECK(s1.cheese_pos == s2.cheese_pos);
  CHECK(o1.planes == o2.planes);
  auto [s3, o3] = reset(cfg, 5);
  CHECK((s3.grid.cells != s1.grid.cells || s3.agent_pos != s1.agent_pos ||
         s3.cheese_pos != s1.cheese_pos));
}

TEST_CASE("reset: TrainRegion k=1 places the cheese in the corner room across resets") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 9;
  cfg.region_size = 1;
  cfg.seed = 3;
  for (uint64_t e = 0; e < 100; ++e) {
    auto [s, o] = reset(cfg, e);
    CHECK(s.cheese_pos == Pos{1, 7});
    CHECK(s.agent_pos != s.cheese_pos);
  }
}

TEST_CASE("reset: degenerate size range yields fixed dimensions") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 9;
  cfg.seed = 8;
  for (uint64_t e = 0; e < 20; ++e) {
    auto [s, o] = reset(cfg, e);
    CHECK(s.grid.width == 9);
    CHECK(s.grid.height == 9);
  }
}

TEST_CASE("step: reward 10 on reaching the cheese") {
  auto parsed = parse_text("3 3\n...\n.#.\nA.C\n");
  EnvState s = state_from_parsed(parsed);
  StepResult r1 = step_no_obs(s, Action::Right);
  CHECK(r1.reward == 0.0);
  CHECK(!r1.done);
  StepResult r2 = step_no_obs(r1.state, Action::Right);
  CHECK(r2.reward == 10.0);
  CHECK(r2.done);
  CHECK(r2.state.agent_pos == r2.state.cheese_pos);
}

TEST_CASE("step: blocked move keeps the position") {
  auto parsed = parse_text("3 3\n...\nA#.\n..C\n");
  EnvState s = state_from_parsed(parsed);
  StepResult r = step_no_obs(s, Action::Right);  // into the wall
  CHECK(r.state.agent_pos == s.agent_pos);
  CHECK(r.reward == 0.0);
  CHECK(!r.done);
}

TEST_CASE("step: truncation at max_episode_steps") {
  auto parsed = parse_text("3 3\nA..\n.#.\n..C\n");
  EnvState s = state_from_parsed(parsed);
  s.max_episode_steps = 4;
  for (int i = 0; i < 3; ++i) {
    StepResult r = step_no_obs(s, Action::Up);  // blocked forever
    CHECK(!r.done);
    s = r.state;
  }
  StepResult last = step_no_obs(s, Action::Up);
  CHECK(last.done);
  CHECK(last.reward == 0.0);
  CHECK(last.state.step_count == 4);
}

TEST_CASE("step: stepping a done state violates the contract") {
  auto parsed = parse_text("3 3\nA..\n.#.\n..C\n");
  EnvState s = state_from_parsed(parsed);
  s.done = true;
  CHECK_THROWS_AS(step_no_obs(s, Action::Up), std::logic_error);
}

TEST_CASE("step is pure: replaying an action log reproduces the trajectory") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 13;
  cfg.seed = 21;
  auto [s0, obs0] = reset(cfg, 0);

  Rng rng(55);
  std::vector<Action> log;
  std::vector<Pos> traj{s0.agent_pos};
  EnvState s = s0;
  while (!s.done) {
    Action a = static_cast<Action>(rng.uniform_int(4));
    log.push_back(a);
    s = step_no_obs(s, a).state;
    traj.push_back(s.agent_pos);
  }

  EnvState t = s0;
  size_t i = 0;
  double total = 0.0;
  for (Action a : log) {
    StepResult r = step_no_obs(t, a);
    total += r.reward;
    t = r.state;
    ++i;
    CHECK(t.agent_pos == traj[i]);
  }
  CHECK(t.agent_pos == s.agent_pos);
  CHECK((total == 0.0 || total == 10.0));
}

TEST_CASE("render_text round-trips through parse_text") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 13;
  cfg.seed = 77;
  for (uint64_t e = 0; e < 25; ++e) {
    auto [s, obs] = reset(cfg, e);
    ParsedMaze p = parse_text(render_text(s));
    CHECK(p.grid.cells == s.grid.cells);
    CHECK(p.agent_pos == s.agent_pos);
    REQUIRE(p.cheese_pos.has_value());
    CHECK(*p.cheese_pos == s.cheese_pos);
  }
}

TEST_CASE("render_text: 3x3 maze serializes to a one-row interior") {
  MazeGrid g = generate_maze(7, 3, 3);
  EnvState s;
  s.grid = g;
  s.agent_pos = {1, 1};
  s.cheese_pos = {1, 1};
  CHECK(render_text(s) == "1 1\nA\n");
}

TEST_CASE("render_text: golden 9x9 fixture") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 9;
  cfg.region_size = 1;
  cfg.seed = 2024;
  auto [s, obs] = reset(cfg, 0);
  std::ifstream golden(std::string(MAZERL_TEST_ASSETS) + "/maze_9x9_seed2024_ep0.txt");
  REQUIRE(golden.good());
  std::string expected((std::istreambuf_iterator<char>(golden)),
                       std::istreambuf_iterator<char>());
  CHECK(render_text(s) == expected);
}

TEST_CASE("encode_observation: plane invariants") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 13;
  cfg.seed = 31;
  for (uint64_t e = 0; e < 10; ++e) {
    auto [s, obs0] = reset(cfg, e);
    Observation obs = encode_observation(s, 15);
    int agents = 0, cheeses = 0;
    for (int r = 0; r < 15; ++r)
      for (int c = 0; c < 15; ++c) {
        agents += obs.at(kPlaneAgent, r, c) > 0.5f;
        cheeses += obs.at(kPlaneCheese, r, c) > 0.5f;
        bool inside = r < s.grid.height && c < s.grid.width;
        if (inside)
          CHECK(obs.at(kPlaneWall, r, c) + obs.at(kPlaneOpen, r, c) == 1.0f);
        else
          CHECK(obs.at(kPlaneWall, r, c) + obs.at(kPlaneOpen, r, c) == 0.0f);
      }
    CHECK(agents == 1);
    CHECK(cheeses == 1);
  }
}

TEST_CASE("encode_observation: agent and cheese planes coincide at episode end") {
  auto parsed = parse_text("3 3\n...\n.#.\n.AC\n");
  EnvState s = state_from_parsed(parsed);
  StepResult r = step(s, Action::Right, 9);
  CHECK(r.done);
  CHECK(r.observation.at(kPlaneAgent, 3, 3) == 1.0f);
  CHECK(r.observation.at(kPlaneCheese, 3, 3) == 1.0f);
}

TEST_CASE("encode_observation: padding beyond the maze extent is zero") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 9;
  cfg.seed = 5;
  auto [s, obs0] = reset(cfg, 0);
  Observation obs = encode_observation(s, 15);
  for (int plane = 0; plane < kObsPlanes; ++plane)
    for (int r = 0; r < 15; ++r)
      for (int c = 0; c < 15; ++c)
        if (r >= 9 || c >= 9) CHECK(obs.at(plane, r, c) == 0.0f);
}

TEST_CASE("encode_observation: maze larger than canvas is rejected") {
  EnvConfig cfg;
  cfg.min_size = 11;
  cfg.max_size = 11;
  cfg.seed = 5;
  auto [s, obs0] = reset(cfg, 0);
  CHECK_THROWS_AS(encode_observation(s, 9), std::invalid_argument);
}

TEST_CASE("optimal policy reaches the cheese within open-cell-count steps") {
  EnvConfig cfg;
  cfg.min_size = 9;
  cfg.max_size = 13;
  cfg.goal_mode = GoalMode::TestAnywhere;
  cfg.seed = 99;
  for (uint64_t e = 0; e < 20; ++e) {
    auto [s, obs] = reset(cfg, e);
    int d = shortest_path_distance(s.grid, s.agent_pos, s.cheese_pos);
    REQUIRE(d >= 0);
    CHECK(d <= static_cast<int>(s.grid.open_cells().size()) - 1);
  }
}

TEST_CASE("effective_corner_window: grows past walls and contains the k=1 goal") {
  MazeGrid g = generate_maze(3, 9, 9);
  Window w = effective_corner_window(g, 1);
  CHECK(w.contains(g, Pos{1, 7}));
  CHECK(!w.contains(g, Pos{5, 1}));
}
