#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "osc/data/dataset.hpp"
#include "osc/envs/grid.hpp"
#include "osc/penalty.hpp"

namespace osc::tabular {

inline constexpr int kActions = 2;
/// Key used in next-state counts for any terminal successor.
inline constexpr int kTerminal = -1;

/// Count-based model of a discrete gridworld dataset.
struct TabularModel {
  envs::GridSpec grid;
  std::vector<int> counts;                        // cell * kActions + action
  std::vector<double> reward_sum;                 // same indexing
  std::vector<std::map<int, int>> next_counts;    // successor cell (or kTerminal) -> count

  int cells() const { return grid.cell_count(); }
  int visits(int cell) const { return counts[cell * kActions] + counts[cell * kActions + 1]; }
  int count(int cell, int action) const { return counts[cell * kActions + action]; }
  /// Empirical pi_beta(a|s); zero for cells without visits.
  double behavior(int cell, int action) const;
  double reward(int cell, int action) const;
};

/// ContractError unless the dataset is discrete with (row, col) states.
TabularModel estimate_behavior(const data::Dataset& dataset, const envs::GridSpec& grid);

/// Softmax over the two actions of every cell.
struct SoftmaxPolicy {
  std::vector<double> logits;  // cell * kActions + action

  static SoftmaxPolicy uniform(int cells) { return {std::vector<double>(cells * kActions, 0.0)}; }
  double prob(int cell, int action) const;
  int argmax(int cell) const;
};

using QTable = std::vector<double>;  // cell * kActions + action

struct FittedQ {
  QTable q;
  int iterations = 0;
  /// Sup-norm change of each sweep.
  std::vector<double> deltas;
};

/// Iterates Q <- r + gamma * sum_s' P(s'|s,a) sum_a' pi(a'|s') Q(s',a') over
/// visited (s, a) until the sup-norm change is below `tol`. Unvisited pairs
/// stay 0; terminal successors contribute 0. NumericError past `max_iters`.
FittedQ fitted_q(const TabularModel& model, double gamma, const SoftmaxPolicy& policy, double tol = 1e-10,
                 int max_iters = 200000);

enum class Objective { brac, spot, osc };

const char* objective_name(Objective o);
Objective parse_objective(const std::string& name);

struct AscentOptions {
  int steps = 500;
  double rate = 0.1;
  /// Support threshold on pi_beta; OSC uses eps_breve = -log(epsilon).
  double epsilon = 0.05;
  /// Floor applied to pi_beta inside log terms (BRAC/SPOT) so unvisited
  /// actions get a large finite penalty instead of -inf.
  double log_floor = 1e-6;
};

/// Per-action bonus g(a) for a cell: SPOT lambda*log pi_beta, OSC the
/// indicator lambda*[pi_beta > epsilon]; BRAC's log pi_beta part (its
/// -lambda*log pi term depends on the policy and is handled by the ascent).
double action_bonus(const TabularModel& model, int cell, int action, Objective objective, double lambda,
                    const AscentOptions& options);

/// Per-cell exact gradient ascent on sum_a pi(a)(Q(s,a) + bonus(a)) (minus
/// lambda*KL(pi || pi_beta) for BRAC), starting from uniform logits.
SoftmaxPolicy optimize_discrete_policy(const TabularModel& model, const QTable& q, Objective objective,
                                       double lambda, const AscentOptions& options = {});

struct SupportedSolution {
  QTable q;
  std::vector<double> value;
  /// Greedy in-support action per cell, -1 where the support is empty.
  std::vector<int> policy;
  std::vector<bool> empty_support;
  int iterations = 0;
  std::vector<double> deltas;
};

/// Value iteration whose max ranges over actions with pi_beta(a|s) > epsilon.
/// Cells with an empty support are flagged and valued 0.
SupportedSolution supported_value_iteration(const TabularModel& model, double gamma, double epsilon,
                                            double tol = 1e-12, int max_iters = 200000);

/// Optimal-action probability per grid cell (rows of the grid); NaN on
/// terminal cells.
std::vector<std::vector<double>> optimal_action_grid(const envs::GridSpec& grid, const SoftmaxPolicy& policy);
std::vector<std::vector<double>> optimal_action_grid(const TabularModel& model);
std::vector<std::vector<double>> optimal_action_grid(const envs::GridSpec& grid, const std::vector<int>& actions);

/// Writes `<stem>.csv` and `<stem>.svg` (white = 0 to deep blue = 1).
void export_heatmap(const std::filesystem::path& stem, const std::string& title,
                    const std::vector<std::vector<double>>& grid);

struct PolicyScore {
  /// 1 if the greedy (argmax) rollout from S reaches G, else 0.
  double success_rate = 0.0;
  /// Probability that the stochastic policy reaches G from S.
  double stochastic_success = 0.0;
  /// Fraction of non-terminal cells whose argmax is the optimal action.
  double on_path_optimal = 0.0;
};

PolicyScore score_policy(const envs::GridSpec& grid, const SoftmaxPolicy& policy);
PolicyScore score_actions(const envs::GridSpec& grid, const std::vector<int>& actions);

struct DemoConfig {
  envs::GridSpec grid = envs::make_z_grid();
  std::size_t transitions = 100000;
  double gamma = 0.99;
  double lambda = 1.0;
  int rounds = 10;
  AscentOptions ascent;
  std::uint64_t seed = 0;
};

nlohmann::json demo_config_to_json(const DemoConfig& cfg);
DemoConfig demo_config_from_json(const nlohmann::json& j);

struct ObjectiveResult {
  Objective objective;
  SoftmaxPolicy policy;
  PolicyScore score;
};

struct DemoResult {
  TabularModel model;
  SupportedSolution oracle;
  PolicyScore oracle_score;
  std::vector<ObjectiveResult> runs;  // brac, spot, osc
  /// Spearman correlation between p(cell) and BRAC's optimal-action probability
  /// over non-terminal cells.
  double brac_rank_correlation = 0.0;
};

/// Generates the dataset, fits the behavior model and alternates fitted Q
/// evaluation with per-cell policy ascent for each objective.
DemoResult run_tabular_demo(const DemoConfig& cfg);
DemoResult run_tabular_demo(const DemoConfig& cfg, const data::Dataset& dataset);

nlohmann::json demo_summary(const DemoConfig& cfg, const DemoResult& result);

}  // namespace osc::tabular
