#include "osc/tabular/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "osc/errors.hpp"
#include "osc/io.hpp"
#include "osc/report/svg.hpp"
#include "osc/stats.hpp"

namespace osc::tabular {

using envs::Cell;
using envs::GridAction;
using envs::GridSpec;

double TabularModel::behavior(int cell, int action) const {
  const int n = visits(cell);
  return n == 0 ? 0.0 : static_cast<double>(count(cell, action)) / n;
}

double TabularModel::reward(int cell, int action) const {
  const int n = count(cell, action);
  return n == 0 ? 0.0 : reward_sum[cell * kActions + action] / n;
}

TabularModel estimate_behavior(const data::Dataset& dataset, const GridSpec& grid) {
  require(dataset.discrete && dataset.state_dim == 2 && dataset.action_dim == 1,
          "estimate_behavior needs a discrete gridworld dataset");
  TabularModel m{grid, std::vector<int>(grid.cell_count() * kActions, 0),
                 std::vector<double>(grid.cell_count() * kActions, 0.0),
                 std::vector<std::map<int, int>>(grid.cell_count() * kActions)};
  auto cell_of = [&](std::span<const double> s) {
    return Cell{static_cast<int>(std::lround(s[0])), static_cast<int>(std::lround(s[1]))};
  };
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Cell c = cell_of(dataset.state(i));
    require(grid.inside(c), "dataset state lies outside the grid");
    const long a = std::lround(dataset.action(i)[0]);
    require(a == 0 || a == 1, "dataset action must be 0 or 1");
    const int k = grid.index(c) * kActions + static_cast<int>(a);
    ++m.counts[k];
    m.reward_sum[k] += dataset.rewards[i];
    const int next = dataset.dones[i] ? kTerminal : grid.index(cell_of(dataset.next_state(i)));
    ++m.next_counts[k][next];
  }
  return m;
}

double SoftmaxPolicy::prob(int cell, int action) const {
  const double a = logits[cell * kActions], b = logits[cell * kActions + 1];
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  return (action == 0 ? ea : eb) / (ea + eb);
}

int SoftmaxPolicy::argmax(int cell) const { return logits[cell * kActions + 1] > logits[cell * kActions] ? 1 : 0; }

namespace {

// Expected continuation value sum_s' P(s'|s,a) * v(s') with terminal successors at 0.
double expected_next(const TabularModel& m, int k, const std::vector<double>& v) {
  const int n = m.counts[k];
  if (n == 0) return 0.0;
  double total = 0.0;
  for (const auto& [next, c] : m.next_counts[k]) {
    if (next != kTerminal) total += c * v[next];
  }
  return total / n;
}

}  // namespace

FittedQ fitted_q(const TabularModel& model, double gamma, const SoftmaxPolicy& policy, double tol, int max_iters) {
  require(gamma >= 0.0 && gamma < 1.0, "fitted_q needs gamma in [0, 1)");
  const int cells = model.cells();
  FittedQ out{QTable(cells * kActions, 0.0), 0, {}};
  std::vector<double> v(cells, 0.0);
  for (int it = 0; it < max_iters; ++it) {
    for (int s = 0; s < cells; ++s) {
      v[s] = policy.prob(s, 0) * out.q[s * kActions] + policy.prob(s, 1) * out.q[s * kActions + 1];
    }
    double delta = 0.0;
    QTable next(out.q.size(), 0.0);
    for (int k = 0; k < cells * kActions; ++k) {
      if (model.counts[k] == 0) continue;
      next[k] = model.reward(k / kActions, k % kActions) + gamma * expected_next(model, k, v);
      delta = std::max(delta, std::abs(next[k] - out.q[k]));
    }
    out.q = std::move(next);
    out.deltas.push_back(delta);
    out.iterations = it + 1;
    if (delta < tol) return out;
  }
  throw NumericError("fitted_q did not converge within " + std::to_string(max_iters) + " sweeps");
}

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::brac: return "brac";
    case Objective::spot: return "spot";
    case Objective::osc: return "osc";
  }
  return "?";
}

Objective parse_objective(const std::string& name) {
  if (name == "brac") return Objective::brac;
  if (name == "spot") return Objective::spot;
  if (name == "osc") return Objective::osc;
  throw ContractError("unknown tabular objective '" + name + "'");
}

double action_bonus(const TabularModel& model, int cell, int action, Objective objective, double lambda,
                    const AscentOptions& options) {
  const double p = model.behavior(cell, action);
  const double f = -std::log(std::max(p, options.log_floor));  // NLL of the action under pi_beta
  switch (objective) {
    case Objective::spot:
      return spot_penalty(f, lambda);
    case Objective::osc: {
      // F < -log(eps) is the same test as pi_beta > eps; unvisited actions are out.
      if (p == 0.0) return 0.0;
      const PenaltyConfig cfg{lambda, 1.0, -std::log(options.epsilon)};
      return indicator_penalty(-std::log(p), cfg);
    }
    case Objective::brac:
      return -lambda * f;
  }
  return 0.0;
}

SoftmaxPolicy optimize_discrete_policy(const TabularModel& model, const QTable& q, Objective objective,
                                       double lambda, const AscentOptions& options) {
  require(lambda >= 0.0, "lambda must be >= 0");
  const int cells = model.cells();
  SoftmaxPolicy policy = SoftmaxPolicy::uniform(cells);
  for (int s = 0; s < cells; ++s) {
    if (model.grid.terminal(model.grid.cell(s))) continue;
    double g_fixed[kActions];
    for (int a = 0; a < kActions; ++a) {
      g_fixed[a] = q[s * kActions + a] + action_bonus(model, s, a, objective, lambda, options);
    }
    double* theta = policy.logits.data() + s * kActions;
    for (int step = 0; step < options.steps; ++step) {
      const double p0 = policy.prob(s, 0), p1 = 1.0 - p0;
      double g0 = g_fixed[0], g1 = g_fixed[1];
      if (objective == Objective::brac) {
        // -lambda * sum pi log pi: its extra gradient term sums to zero, so it
        // enters as a per-action value -lambda * log pi(a)
        g0 -= lambda * std::log(std::max(p0, 1e-300));
        g1 -= lambda * std::log(std::max(p1, 1e-300));
      }
      const double baseline = p0 * g0 + p1 * g1;
      theta[0] += options.rate * p0 * (g0 - baseline);
      theta[1] += options.rate * p1 * (g1 - baseline);
    }
  }
  return policy;
}

SupportedSolution supported_value_iteration(const TabularModel& model, double gamma, double epsilon, double tol,
                                            int max_iters) {
  require(gamma >= 0.0 && gamma < 1.0, "supported value iteration needs gamma in [0, 1)");
  require(epsilon >= 0.0 && epsilon < 1.0, "supported value iteration needs epsilon in [0, 1)");
  const int cells = model.cells();
  SupportedSolution out;
  out.q.assign(cells * kActions, 0.0);
  out.value.assign(cells, 0.0);
  out.policy.assign(cells, -1);
  out.empty_support.assign(cells, false);
  auto supported = [&](int s, int a) { return model.behavior(s, a) > epsilon; };
  for (int s = 0; s < cells; ++s) {
    if (model.grid.terminal(model.grid.cell(s))) continue;
    out.empty_support[s] = !supported(s, 0) && !supported(s, 1);
  }
  for (int it = 0; it < max_iters; ++it) {
    QTable q(cells * kActions, 0.0);
    for (int k = 0; k < cells * kActions; ++k) {
      if (model.counts[k] > 0) q[k] = model.reward(k / kActions, k % kActions) + gamma * expected_next(model, k, out.value);
    }
    double delta = 0.0;
    std::vector<double> v(cells, 0.0);
    for (int s = 0; s < cells; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kActions; ++a) {
        if (supported(s, a)) best = std::max(best, q[s * kActions + a]);
      }
      v[s] = std::isinf(best) ? 0.0 : best;
      delta = std::max(delta, std::abs(v[s] - out.value[s]));
    }
    out.q = std::move(q);
    out.value = std::move(v);
    out.deltas.push_back(delta);
    out.iterations = it + 1;
    if (delta < tol) {
      for (int s = 0; s < cells; ++s) {
        if (model.grid.terminal(model.grid.cell(s)) || out.empty_support[s]) continue;
        int best = -1;
        for (int a = 0; a < kActions; ++a) {
          if (supported(s, a) && (best < 0 || out.q[s * kActions + a] > out.q[s * kActions + best])) best = a;
        }
        out.policy[s] = best;
      }
      return out;
    }
  }
  throw NumericError("supported value iteration did not converge");
}

std::vector<std::vector<double>> optimal_action_grid(const GridSpec& grid, const SoftmaxPolicy& policy) {
  std::vector<std::vector<double>> out(grid.height, std::vector<double>(grid.width, std::nan("")));
  for (Cell c : grid.non_terminal_cells()) {
    out[c.row][c.col] = policy.prob(grid.index(c), static_cast<int>(envs::optimal_action(grid, c)));
  }
  return out;
}

std::vector<std::vector<double>> optimal_action_grid(const TabularModel& model) {
  const GridSpec& grid = model.grid;
  std::vector<std::vector<double>> out(grid.height, std::vector<double>(grid.width, std::nan("")));
  for (Cell c : grid.non_terminal_cells()) {
    if (model.visits(grid.index(c)) == 0) continue;
    out[c.row][c.col] = model.behavior(grid.index(c), static_cast<int>(envs::optimal_action(grid, c)));
  }
  return out;
}

std::vector<std::vector<double>> optimal_action_grid(const GridSpec& grid, const std::vector<int>& actions) {
  std::vector<std::vector<double>> out(grid.height, std::vector<double>(grid.width, std::nan("")));
  for (Cell c : grid.non_terminal_cells()) {
    const int a = actions[grid.index(c)];
    if (a < 0) continue;
    out[c.row][c.col] = a == static_cast<int>(envs::optimal_action(grid, c)) ? 1.0 : 0.0;
  }
  return out;
}

void export_heatmap(const std::filesystem::path& stem, const std::string& title,
                    const std::vector<std::vector<double>>& grid) {
  std::ostringstream csv;
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) csv << ",";
      if (!std::isnan(row[c])) csv << row[c];
    }
    csv << "\n";
  }
  std::filesystem::path csv_path = stem, svg_path = stem;
  csv_path += ".csv";
  svg_path += ".svg";
  io::write_text(csv_path, csv.str());
  io::write_text(svg_path, report::svg_heatmap(title, grid));
}

namespace {

// Probability of reaching G from each cell when acting with probabilities pi(cell, a).
template <class Prob>
double reach_probability(const GridSpec& grid, Prob pi) {
  std::vector<double> reach(grid.cell_count(), 0.0);
  for (int i = grid.cell_count() - 1; i >= 0; --i) {
    const Cell c = grid.cell(i);
    if (grid.terminal(c)) continue;
    double total = 0.0;
    for (int a = 0; a < kActions; ++a) {
      const Cell n = envs::move(c, static_cast<GridAction>(a));
      const double next = n == grid.goal ? 1.0 : grid.terminal(n) ? 0.0 : reach[grid.index(n)];
      total += pi(i, a) * next;
    }
    reach[i] = total;
  }
  return reach[grid.index(grid.start)];
}

template <class Greedy>
PolicyScore score_with(const GridSpec& grid, Greedy greedy, double stochastic) {
  PolicyScore score;
  score.stochastic_success = stochastic;
  Cell c = grid.start;
  for (int t = 0; t < grid.width + grid.height && !grid.terminal(c); ++t) {
    const int a = greedy(grid.index(c));
    if (a < 0) break;
    c = envs::grid_step(grid, c, static_cast<GridAction>(a)).next;
  }
  score.success_rate = c == grid.goal ? 1.0 : 0.0;
  const auto cells = grid.non_terminal_cells();
  int good = 0;
  for (Cell x : cells) good += greedy(grid.index(x)) == static_cast<int>(envs::optimal_action(grid, x));
  score.on_path_optimal = cells.empty() ? 0.0 : static_cast<double>(good) / cells.size();
  return score;
}

}  // namespace

PolicyScore score_policy(const GridSpec& grid, const SoftmaxPolicy& policy) {
  const double stochastic = reach_probability(grid, [&](int s, int a) { return policy.prob(s, a); });
  return score_with(grid, [&](int s) { return policy.argmax(s); }, stochastic);
}

PolicyScore score_actions(const GridSpec& grid, const std::vector<int>& actions) {
  const double stochastic = reach_probability(grid, [&](int s, int a) { return actions[s] == a ? 1.0 : 0.0; });
  return score_with(grid, [&](int s) { return actions[s]; }, stochastic);
}

nlohmann::json demo_config_to_json(const DemoConfig& cfg) {
  return {{"grid", envs::grid_spec_to_json(cfg.grid)},
          {"transitions", cfg.transitions},
          {"gamma", cfg.gamma},
          {"lambda", cfg.lambda},
          {"rounds", cfg.rounds},
          {"ascent_steps", cfg.ascent.steps},
          {"ascent_rate", cfg.ascent.rate},
          {"epsilon", cfg.ascent.epsilon},
          {"log_floor", cfg.ascent.log_floor},
          {"seed", cfg.seed}};
}

DemoConfig demo_config_from_json(const nlohmann::json& j) {
  DemoConfig cfg;
  if (j.contains("grid")) cfg.grid = envs::grid_spec_from_json(j.at("grid"));
  cfg.transitions = j.value("transitions", cfg.transitions);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.rounds = j.value("rounds", cfg.rounds);
  cfg.ascent.steps = j.value("ascent_steps", cfg.ascent.steps);
  cfg.ascent.rate = j.value("ascent_rate", cfg.ascent.rate);
  cfg.ascent.epsilon = j.value("epsilon", cfg.ascent.epsilon);
  cfg.ascent.log_floor = j.value("log_floor", cfg.ascent.log_floor);
  cfg.seed = j.value("seed", cfg.seed);
  require(cfg.transitions >= 1 && cfg.rounds >= 1, "tabular demo needs transitions >= 1 and rounds >= 1");
  require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "tabular demo gamma must lie in (0, 1)");
  return cfg;
}

DemoResult run_tabular_demo(const DemoConfig& cfg) {
  envs::GridEnv env(cfg.grid, false, cfg.grid.random_starts);
  Rng rng = Rng(cfg.seed).substream("tabular-data");
  return run_tabular_demo(cfg, data::collect_dataset(env, envs::grid_behavior(env), cfg.transitions, rng));
}

DemoResult run_tabular_demo(const DemoConfig& cfg, const data::Dataset& dataset) {
  DemoResult result{estimate_behavior(dataset, cfg.grid), {}, {}, {}, 0.0};
  const TabularModel& model = result.model;
  result.oracle = supported_value_iteration(model, cfg.gamma, cfg.ascent.epsilon);
  result.oracle_score = score_actions(cfg.grid, result.oracle.policy);
  for (Objective obj : {Objective::brac, Objective::spot, Objective::osc}) {
    SoftmaxPolicy policy = SoftmaxPolicy::uniform(model.cells());
    for (int r = 0; r < cfg.rounds; ++r) {
      const FittedQ q = fitted_q(model, cfg.gamma, policy);
      policy = optimize_discrete_policy(model, q.q, obj, cfg.lambda, cfg.ascent);
    }
    result.runs.push_back({obj, policy, score_policy(cfg.grid, policy)});
  }
  std::vector<double> p, brac;
  for (Cell c : cfg.grid.non_terminal_cells()) {
    p.push_back(envs::behavior_probability(cfg.grid, c));
    brac.push_back(result.runs[0].policy.prob(cfg.grid.index(c), static_cast<int>(envs::optimal_action(cfg.grid, c))));
  }
  result.brac_rank_correlation = p.size() >= 2 ? stats::spearman(p, brac) : 0.0;
  return result;
}

nlohmann::json demo_summary(const DemoConfig& cfg, const DemoResult& result) {
  auto score_json = [](const PolicyScore& s) {
    return nlohmann::json{{"success_rate", s.success_rate},
                          {"stochastic_success", s.stochastic_success},
                          {"on_path_optimal_fraction", s.on_path_optimal}};
  };
  nlohmann::json j = {{"config", demo_config_to_json(cfg)},
                      {"oracle", score_json(result.oracle_score)},
                      {"brac_rank_correlation", result.brac_rank_correlation}};
  for (const ObjectiveResult& r : result.runs) j["objectives"][objective_name(r.objective)] = score_json(r.score);
  return j;
}

}  // namespace osc::tabular
