#include "osc/envs/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "osc/errors.hpp"

namespace osc::envs {

bool GridSpec::is_gray(Cell c) const { return std::find(gray.begin(), gray.end(), c) != gray.end(); }

std::vector<Cell> GridSpec::non_terminal_cells() const {
  std::vector<Cell> out;
  for (int i = 0; i < cell_count(); ++i) {
    if (!terminal(cell(i))) out.push_back(cell(i));
  }
  return out;
}

void GridSpec::validate() const {
  require(width >= 1 && height >= 1, "grid needs positive width and height");
  require(inside(start) && inside(goal), "grid start and goal must lie on the grid");
  require(!(start == goal), "grid start and goal must differ");
  require(!is_gray(start) && !is_gray(goal), "grid start and goal cannot be gray");
  require(decay.empty() || static_cast<int>(decay.size()) == cell_count(), "grid decay needs one entry per cell");
  for (double p : decay) require(p >= 0.0 && p <= 1.0, "grid decay entries must be probabilities");
  require(p_start >= 0.0 && p_start <= 1.0 && p_goal >= 0.0 && p_goal <= 1.0, "grid decay endpoints must be probabilities");
}

GridSpec make_z_grid(int width, int height) {
  require(width >= 2 && height >= 2, "z grid needs at least 2 x 2 cells");
  GridSpec spec;
  spec.width = width;
  spec.height = height;
  spec.start = {0, 0};
  spec.goal = {height - 1, width - 1};
  const std::vector<Cell> path = z_path(spec);
  for (int i = 0; i < spec.cell_count(); ++i) {
    const Cell c = spec.cell(i);
    if (std::find(path.begin(), path.end(), c) == path.end()) spec.gray.push_back(c);
  }
  return spec;
}

std::vector<Cell> z_path(const GridSpec& spec) {
  const int turn = (spec.width - 1) / 2;
  std::vector<Cell> path;
  for (int c = 0; c <= turn; ++c) path.push_back({0, c});
  for (int r = 1; r < spec.height; ++r) path.push_back({r, turn});
  for (int c = turn + 1; c < spec.width; ++c) path.push_back({spec.height - 1, c});
  return path;
}

Cell move(Cell c, GridAction a) { return a == GridAction::right ? Cell{c.row, c.col + 1} : Cell{c.row + 1, c.col}; }

GridStep grid_step(const GridSpec& spec, Cell cell, GridAction action) {
  if (spec.terminal(cell)) {
    throw ContractError("grid_step from terminal cell (" + std::to_string(cell.row) + ", " +
                        std::to_string(cell.col) + ")");
  }
  const Cell next = move(cell, action);
  const bool goal = next == spec.goal;
  return {next, goal ? 1.0 : 0.0, spec.terminal(next)};
}

namespace {

// Moves-to-goal for every cell; successors have larger row-major index, so a
// reverse sweep sees them first.
std::vector<int> goal_distances(const GridSpec& spec) {
  std::vector<int> dist(spec.cell_count(), -1);
  for (int i = spec.cell_count() - 1; i >= 0; --i) {
    const Cell c = spec.cell(i);
    if (spec.terminal(c)) continue;
    int best = -1;
    for (GridAction a : {GridAction::right, GridAction::down}) {
      const Cell n = move(c, a);
      int d = -1;
      if (n == spec.goal) {
        d = 1;
      } else if (!spec.terminal(n) && dist[spec.index(n)] >= 0) {
        d = dist[spec.index(n)] + 1;
      }
      if (d >= 0 && (best < 0 || d < best)) best = d;
    }
    dist[i] = best;
  }
  return dist;
}

}  // namespace

int moves_to_goal(const GridSpec& spec, Cell cell) {
  if (cell == spec.goal) return 0;
  if (spec.terminal(cell)) return -1;
  return goal_distances(spec)[spec.index(cell)];
}

GridAction optimal_action(const GridSpec& spec, Cell cell) {
  const std::vector<int> dist = goal_distances(spec);
  auto cost = [&](GridAction a) {
    const Cell n = move(cell, a);
    if (n == spec.goal) return 1;
    if (spec.terminal(n) || dist[spec.index(n)] < 0) return std::numeric_limits<int>::max();
    return dist[spec.index(n)] + 1;
  };
  return cost(GridAction::down) < cost(GridAction::right) ? GridAction::down : GridAction::right;
}

int manhattan_to_goal(const GridSpec& spec, Cell cell) {
  return std::abs(spec.goal.row - cell.row) + std::abs(spec.goal.col - cell.col);
}

double behavior_probability(const GridSpec& spec, Cell cell) {
  if (!spec.decay.empty()) return spec.decay[spec.index(cell)];
  const int d_start = manhattan_to_goal(spec, spec.start);
  if (d_start <= 1) return spec.p_start;
  const double d = manhattan_to_goal(spec, cell);
  const double p = spec.p_goal + (spec.p_start - spec.p_goal) * (d - 1.0) / (d_start - 1.0);
  return std::clamp(p, 0.0, 1.0);
}

GridAction behavior_policy(const GridSpec& spec, Cell cell, Rng& rng) {
  const GridAction best = optimal_action(spec, cell);
  const GridAction other = best == GridAction::right ? GridAction::down : GridAction::right;
  return rng.bernoulli(behavior_probability(spec, cell)) ? best : other;
}

nlohmann::json grid_spec_to_json(const GridSpec& spec) {
  nlohmann::json gray = nlohmann::json::array();
  for (Cell c : spec.gray) gray.push_back({c.row, c.col});
  nlohmann::json j = {{"width", spec.width},
                      {"height", spec.height},
                      {"start", {spec.start.row, spec.start.col}},
                      {"goal", {spec.goal.row, spec.goal.col}},
                      {"gray", gray},
                      {"p_start", spec.p_start},
                      {"p_goal", spec.p_goal},
                      {"random_starts", spec.random_starts}};
  if (!spec.decay.empty()) j["decay"] = spec.decay;
  return j;
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
  auto cell = [](const nlohmann::json& v) { return Cell{v.at(0).get<int>(), v.at(1).get<int>()}; };
  GridSpec spec = make_z_grid(j.value("width", 8), j.value("height", 8));
  if (j.contains("start")) spec.start = cell(j.at("start"));
  if (j.contains("goal")) spec.goal = cell(j.at("goal"));
  if (j.contains("gray")) {
    spec.gray.clear();
    for (const auto& g : j.at("gray")) spec.gray.push_back(cell(g));
  }
  spec.decay = j.value("decay", std::vector<double>{});
  spec.p_start = j.value("p_start", spec.p_start);
  spec.p_goal = j.value("p_goal", spec.p_goal);
  spec.random_starts = j.value("random_starts", spec.random_starts);
  spec.validate();
  return spec;
}

GridEnv::GridEnv(GridSpec spec, bool continuous_actions, bool random_starts)
    : spec_(std::move(spec)), continuous_(continuous_actions), random_starts_(random_starts), cell_(spec_.start) {
  spec_.validate();
}

std::vector<double> GridEnv::features(Cell c) const {
  if (!continuous_) return {static_cast<double>(c.row), static_cast<double>(c.col)};
  auto scale = [](int v, int n) { return n > 1 ? 2.0 * v / (n - 1) - 1.0 : 0.0; };
  return {scale(c.row, spec_.height), scale(c.col, spec_.width)};
}

Cell GridEnv::cell_of(std::span<const double> state) const {
  if (state.size() != 2) throw DimensionError("grid state must have two entries");
  if (!continuous_) return {static_cast<int>(std::lround(state[0])), static_cast<int>(std::lround(state[1]))};
  auto unscale = [](double x, int n) { return n > 1 ? static_cast<int>(std::lround((x + 1.0) * (n - 1) / 2.0)) : 0; };
  return {unscale(state[0], spec_.height), unscale(state[1], spec_.width)};
}

GridAction GridEnv::decode(std::span<const double> action) const {
  if (action.size() != 1) throw DimensionError("grid action must have one entry");
  if (continuous_) return action[0] >= 0.0 ? GridAction::right : GridAction::down;
  const long index = std::lround(action[0]);
  require(index == 0 || index == 1, "discrete grid action must be 0 (right) or 1 (down)");
  return static_cast<GridAction>(index);
}

std::vector<double> GridEnv::reset(Rng& rng) {
  if (random_starts_) {
    const std::vector<Cell> cells = spec_.non_terminal_cells();
    cell_ = cells[rng.below(cells.size())];
  } else {
    cell_ = spec_.start;
  }
  return features(cell_);
}

StepResult GridEnv::step(std::span<const double> action) {
  const GridStep s = grid_step(spec_, cell_, decode(action));
  cell_ = s.next;
  return {features(cell_), s.reward, s.done, cell_ == spec_.goal};
}

nlohmann::json GridEnv::spec() const {
  nlohmann::json grid = grid_spec_to_json(spec_);
  grid["random_starts"] = random_starts_;
  return {{"kind", continuous_ ? "gridworld-continuous" : "gridworld"}, {"grid", grid}};
}

BehaviorFn grid_behavior(const GridEnv& env) {
  const GridEnv copy = env;
  return [copy](std::span<const double> state, Rng& rng) {
    const GridAction a = behavior_policy(copy.grid(), copy.cell_of(state), rng);
    if (!copy.continuous_actions()) return std::vector<double>{static_cast<double>(a)};
    // (0, 1] for right, [-1, 0) for down
    const double u = 1.0 - rng.uniform();
    return std::vector<double>{a == GridAction::right ? u : -u};
  };
}

}  // namespace osc::envs
