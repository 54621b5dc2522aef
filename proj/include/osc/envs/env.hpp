#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "osc/rng.hpp"

namespace osc::envs {

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  /// True only when the next state is terminal; horizon cut-offs are not terminal.
  bool done = false;
  bool success = false;
};

/// Episodic environment with vector states and vector actions. Discrete
/// environments take the action index as a single value.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual bool discrete() const { return false; }
  /// Per-dimension action bounds (the same for every dimension).
  virtual double action_low() const = 0;
  virtual double action_high() const = 0;
  /// Maximum episode length before a non-terminal cut-off.
  virtual int horizon() const = 0;

  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(std::span<const double> action) = 0;

  virtual nlohmann::json spec() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// A stochastic policy over raw environment actions.
using BehaviorFn = std::function<std::vector<double>(std::span<const double> state, Rng& rng)>;

/// Builds an environment from its spec() JSON ("kind": "gridworld",
/// "gridworld-continuous" or "point-mass").
std::unique_ptr<Environment> make_environment(const nlohmann::json& spec);

/// The behavior policy that belongs to an environment spec.
BehaviorFn make_behavior(const nlohmann::json& spec);

}  // namespace osc::envs
