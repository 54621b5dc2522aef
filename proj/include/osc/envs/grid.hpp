#pragma once

#include <vector>

#include "osc/envs/env.hpp"

namespace osc::envs {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class GridAction { right = 0, down = 1 };

/// Right/down gridworld. Reward 1 on entering the goal; episodes end at the
/// goal, on entering a gray cell, or on stepping off the grid.
struct GridSpec {
  int width = 8;
  int height = 8;
  Cell start{0, 0};
  Cell goal{7, 7};
  std::vector<Cell> gray;
  /// Probability that the behavior policy picks the optimal action, row-major
  /// per cell. Empty means the default linear decay below.
  std::vector<double> decay;
  double p_start = 0.9;
  double p_goal = 0.1;
  /// Dataset episodes start at a uniformly random non-terminal cell when true,
  /// otherwise at `start`. Evaluation always starts at `start`.
  bool random_starts = true;

  bool inside(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  bool is_gray(Cell c) const;
  bool terminal(Cell c) const { return !inside(c) || c == goal || is_gray(c); }
  int index(Cell c) const { return c.row * width + c.col; }
  Cell cell(int index) const { return {index / width, index % width}; }
  int cell_count() const { return width * height; }
  std::vector<Cell> non_terminal_cells() const;

  /// ContractError on out-of-range start/goal, start == goal, or a gray start/goal.
  void validate() const;
};

/// 8x8 (or any size) grid whose only non-gray cells form a z-shaped path:
/// right along the top row to the middle column, down it, then right to G.
GridSpec make_z_grid(int width = 8, int height = 8);

/// The cells of the z path from start to goal, in order.
std::vector<Cell> z_path(const GridSpec& spec);

struct GridStep {
  Cell next;
  double reward = 0.0;
  bool done = false;
};

Cell move(Cell c, GridAction a);
/// ContractError when stepping from a terminal cell.
GridStep grid_step(const GridSpec& spec, Cell cell, GridAction action);

/// Action on a shortest right/down route to the goal avoiding terminal cells
/// (right when both or neither reach it).
GridAction optimal_action(const GridSpec& spec, Cell cell);
/// Number of moves to the goal under optimal play, or -1 if unreachable.
int moves_to_goal(const GridSpec& spec, Cell cell);

int manhattan_to_goal(const GridSpec& spec, Cell cell);
/// p(cell): the configured decay, or linear in Manhattan distance from
/// p_start at S to p_goal next to G.
double behavior_probability(const GridSpec& spec, Cell cell);
GridAction behavior_policy(const GridSpec& spec, Cell cell, Rng& rng);

nlohmann::json grid_spec_to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);

/// Gridworld as an Environment. Discrete form: state (row, col), action index
/// 0 = right, 1 = down. Continuous form: state (row, col) scaled to [-1, 1],
/// one action in [-1, 1] where a >= 0 moves right and a < 0 moves down.
class GridEnv final : public Environment {
 public:
  GridEnv(GridSpec spec, bool continuous_actions, bool random_starts);

  const GridSpec& grid() const { return spec_; }
  Cell position() const { return cell_; }
  bool continuous_actions() const { return continuous_; }

  std::size_t state_dim() const override { return 2; }
  std::size_t action_dim() const override { return 1; }
  bool discrete() const override { return !continuous_; }
  double action_low() const override { return continuous_ ? -1.0 : 0.0; }
  double action_high() const override { return 1.0; }
  int horizon() const override { return spec_.width + spec_.height; }

  std::vector<double> reset(Rng& rng) override;
  StepResult step(std::span<const double> action) override;
  nlohmann::json spec() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<GridEnv>(*this); }

  std::vector<double> features(Cell c) const;
  Cell cell_of(std::span<const double> state) const;
  GridAction decode(std::span<const double> action) const;

 private:
  GridSpec spec_;
  bool continuous_;
  bool random_starts_;
  Cell cell_;
};

/// Behavior for GridEnv: optimal action with probability p(cell). In the
/// continuous form the chosen direction is encoded as U(0, 1] for right and
/// U[-1, 0) for down.
BehaviorFn grid_behavior(const GridEnv& env);

}  // namespace osc::envs
