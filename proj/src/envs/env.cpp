#include "osc/envs/env.hpp"

#include "osc/envs/grid.hpp"
#include "osc/envs/point_mass.hpp"
#include "osc/errors.hpp"

namespace osc::envs {

std::unique_ptr<Environment> make_environment(const nlohmann::json& spec) {
  const std::string kind = spec.value("kind", "");
  if (kind == "gridworld" || kind == "gridworld-continuous") {
    GridSpec grid = grid_spec_from_json(spec.value("grid", nlohmann::json::object()));
    const bool random_starts = grid.random_starts;
    return std::make_unique<GridEnv>(std::move(grid), kind == "gridworld-continuous", random_starts);
  }
  if (kind == "point-mass") return std::make_unique<PointMassEnv>(point_mass_spec_from_json(spec));
  throw ContractError("unknown environment kind '" + kind + "'");
}

BehaviorFn make_behavior(const nlohmann::json& spec) {
  const auto env = make_environment(spec);
  if (const auto* grid = dynamic_cast<const GridEnv*>(env.get())) return grid_behavior(*grid);
  if (const auto* pm = dynamic_cast<const PointMassEnv*>(env.get())) return point_mass_behavior(pm->settings());
  throw ContractError("no behavior policy for this environment");
}

}  // namespace osc::envs
