#pragma once

#include <optional>
#include <vector>

#include "json.hpp"

#include "osc/agent/td3.hpp"
#include "osc/data/dataset.hpp"
#include "osc/envs/env.hpp"
#include "osc/rng.hpp"

namespace osc::harness {

struct EvalSummary {
  int episodes = 0;
  double mean_return = 0.0;
  /// Sample standard deviation over every episode (0 for a single episode).
  double std_return = 0.0;
  double success_rate = 0.0;
  /// Mean return of each evaluation seed.
  std::vector<double> seed_returns;

  friend bool operator==(const EvalSummary&, const EvalSummary&) = default;
};

void to_json(nlohmann::json& j, const EvalSummary& s);
void from_json(const nlohmann::json& j, EvalSummary& s);

/// Rolls out `episodes` episodes under each of `seeds` evaluation seeds
/// (substreams of `root`), up to the environment horizon. An episode counts
/// as a success if any step reports success. ContractError when episodes or
/// seeds is below 1.
EvalSummary eval_policy(const envs::BehaviorFn& policy, envs::Environment& env, int episodes, int seeds,
                        const Rng& root);

/// The actor without exploration noise, mapped back to environment units.
envs::BehaviorFn agent_policy(const agent::AgentParams& agent, const data::ActionScaler& scaler);

/// Hand-written near-optimal controller for an environment spec, when one is
/// known (point-mass and both gridworld variants).
std::optional<envs::BehaviorFn> make_oracle(const nlohmann::json& env_spec);

}  // namespace osc::harness
