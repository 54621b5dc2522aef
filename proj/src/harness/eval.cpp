#include "osc/harness/eval.hpp"

#include <cmath>

#include "osc/envs/grid.hpp"
#include "osc/envs/point_mass.hpp"
#include "osc/errors.hpp"
#include "osc/stats.hpp"

namespace osc::harness {

void to_json(nlohmann::json& j, const EvalSummary& s) {
  j = {{"episodes", s.episodes},
       {"mean_return", s.mean_return},
       {"std_return", s.std_return},
       {"success_rate", s.success_rate},
       {"seed_returns", s.seed_returns}};
}

void from_json(const nlohmann::json& j, EvalSummary& s) {
  s.episodes = j.at("episodes").get<int>();
  s.mean_return = j.at("mean_return").get<double>();
  s.std_return = j.at("std_return").get<double>();
  s.success_rate = j.at("success_rate").get<double>();
  s.seed_returns = j.at("seed_returns").get<std::vector<double>>();
}

EvalSummary eval_policy(const envs::BehaviorFn& policy, envs::Environment& env, int episodes, int seeds,
                        const Rng& root) {
  require(episodes >= 1, "evaluation needs at least one episode");
  require(seeds >= 1, "evaluation needs at least one seed");
  std::vector<double> returns;
  int successes = 0;
  EvalSummary out;
  for (int s = 0; s < seeds; ++s) {
    Rng rng = root.substream(static_cast<std::uint64_t>(s));
    double seed_total = 0.0;
    for (int e = 0; e < episodes; ++e) {
      std::vector<double> state = env.reset(rng);
      double total = 0.0;
      bool success = false;
      for (int t = 0; t < env.horizon(); ++t) {
        envs::StepResult r = env.step(policy(state, rng));
        total += r.reward;
        success = success || r.success;
        if (r.done) break;
        state = std::move(r.state);
      }
      returns.push_back(total);
      seed_total += total;
      successes += success;
    }
    out.seed_returns.push_back(seed_total / episodes);
  }
  out.episodes = static_cast<int>(returns.size());
  out.mean_return = stats::mean(returns);
  out.std_return = returns.size() > 1 ? stats::stddev(returns) : 0.0;
  out.success_rate = static_cast<double>(successes) / static_cast<double>(returns.size());
  return out;
}

envs::BehaviorFn agent_policy(const agent::AgentParams& agent, const data::ActionScaler& scaler) {
  return [&agent, scaler](std::span<const double> state, Rng& rng) {
    return scaler.denormalize(agent::act(agent, state, 0.0, rng));
  };
}

std::optional<envs::BehaviorFn> make_oracle(const nlohmann::json& env_spec) {
  const std::string kind = env_spec.value("kind", "");
  if (kind == "point-mass") return envs::point_mass_oracle(envs::point_mass_spec_from_json(env_spec));
  if (kind == "gridworld" || kind == "gridworld-continuous") {
    std::shared_ptr<const envs::GridEnv> grid(
        dynamic_cast<envs::GridEnv*>(envs::make_environment(env_spec).release()));
    return [grid](std::span<const double> state, Rng&) {
      const envs::GridAction a = envs::optimal_action(grid->grid(), grid->cell_of(state));
      if (grid->continuous_actions()) return std::vector<double>{a == envs::GridAction::right ? 1.0 : -1.0};
      return std::vector<double>{static_cast<double>(a)};
    };
  }
  return std::nullopt;
}

}  // namespace osc::harness
