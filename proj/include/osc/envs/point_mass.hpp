#pragma once

#include <array>

#include "osc/envs/env.hpp"

namespace osc::envs {

/// 2-D point mass: position in [-1, 1]^2, velocity action in
/// [-max_speed, max_speed]^2, reward -|position - goal| after each move.
struct PointMassSpec {
  std::array<double, 2> goal{0.5, 0.5};
  int horizon = 30;
  double max_speed = 0.1;
  /// Success when the final position lies within this distance of the goal.
  double success_radius = 0.1;
  /// Behavior: with probability toward_prob a noisy step toward the goal,
  /// otherwise a noisy step away from it.
  double toward_prob = 0.2;
  double behavior_speed = 0.07;
  double behavior_noise = 0.04;

  void validate() const;
};

nlohmann::json point_mass_spec_to_json(const PointMassSpec& spec);
PointMassSpec point_mass_spec_from_json(const nlohmann::json& j);

class PointMassEnv final : public Environment {
 public:
  explicit PointMassEnv(PointMassSpec spec);

  const PointMassSpec& settings() const { return spec_; }

  std::size_t state_dim() const override { return 2; }
  std::size_t action_dim() const override { return 2; }
  double action_low() const override { return -spec_.max_speed; }
  double action_high() const override { return spec_.max_speed; }
  int horizon() const override { return spec_.horizon; }

  /// Uniform start position in [-1, 1]^2.
  std::vector<double> reset(Rng& rng) override;
  StepResult step(std::span<const double> action) override;
  nlohmann::json spec() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PointMassEnv>(*this); }

 private:
  PointMassSpec spec_;
  std::array<double, 2> pos_{0.0, 0.0};
  int t_ = 0;
};

/// Noisy steps toward the goal with probability toward_prob, away otherwise.
BehaviorFn point_mass_behavior(const PointMassSpec& spec);
/// Greedy controller: clip(goal - position) to the speed limit.
BehaviorFn point_mass_oracle(const PointMassSpec& spec);

}  // namespace osc::envs
