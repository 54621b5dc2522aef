#include "osc/envs/point_mass.hpp"

#include <algorithm>
#include <cmath>

#include "osc/errors.hpp"

namespace osc::envs {

void PointMassSpec::validate() const {
  require(horizon >= 1, "point-mass horizon must be at least 1");
  require(max_speed > 0.0, "point-mass max_speed must be positive");
  require(std::abs(goal[0]) <= 1.0 && std::abs(goal[1]) <= 1.0, "point-mass goal must lie in [-1, 1]^2");
  require(toward_prob >= 0.0 && toward_prob <= 1.0, "point-mass toward_prob must be a probability");
  require(behavior_noise >= 0.0 && success_radius > 0.0, "point-mass noise must be >= 0 and radius > 0");
}

nlohmann::json point_mass_spec_to_json(const PointMassSpec& spec) {
  return {{"goal", spec.goal},
          {"horizon", spec.horizon},
          {"max_speed", spec.max_speed},
          {"success_radius", spec.success_radius},
          {"toward_prob", spec.toward_prob},
          {"behavior_speed", spec.behavior_speed},
          {"behavior_noise", spec.behavior_noise}};
}

PointMassSpec point_mass_spec_from_json(const nlohmann::json& j) {
  PointMassSpec spec;
  spec.goal = j.value("goal", spec.goal);
  spec.horizon = j.value("horizon", spec.horizon);
  spec.max_speed = j.value("max_speed", spec.max_speed);
  spec.success_radius = j.value("success_radius", spec.success_radius);
  spec.toward_prob = j.value("toward_prob", spec.toward_prob);
  spec.behavior_speed = j.value("behavior_speed", spec.behavior_speed);
  spec.behavior_noise = j.value("behavior_noise", spec.behavior_noise);
  spec.validate();
  return spec;
}

PointMassEnv::PointMassEnv(PointMassSpec spec) : spec_(spec) { spec_.validate(); }

std::vector<double> PointMassEnv::reset(Rng& rng) {
  pos_ = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  t_ = 0;
  return {pos_[0], pos_[1]};
}

StepResult PointMassEnv::step(std::span<const double> action) {
  if (action.size() != 2) throw DimensionError("point-mass action must have two entries");
  for (int i = 0; i < 2; ++i) {
    pos_[i] = std::clamp(pos_[i] + std::clamp(action[i], -spec_.max_speed, spec_.max_speed), -1.0, 1.0);
  }
  ++t_;
  const double dist = std::hypot(pos_[0] - spec_.goal[0], pos_[1] - spec_.goal[1]);
  return {{pos_[0], pos_[1]}, -dist, false, t_ >= spec_.horizon && dist <= spec_.success_radius};
}

nlohmann::json PointMassEnv::spec() const {
  nlohmann::json j = point_mass_spec_to_json(spec_);
  j["kind"] = "point-mass";
  return j;
}

namespace {

// Unit vector from the position toward the goal (zero at the goal).
std::array<double, 2> toward(const PointMassSpec& spec, std::span<const double> state) {
  const double dx = spec.goal[0] - state[0], dy = spec.goal[1] - state[1];
  const double n = std::hypot(dx, dy);
  if (n < 1e-12) return {0.0, 0.0};
  return {dx / n, dy / n};
}

}  // namespace

BehaviorFn point_mass_behavior(const PointMassSpec& spec) {
  return [spec](std::span<const double> state, Rng& rng) {
    const auto u = toward(spec, state);
    const double sign = rng.bernoulli(spec.toward_prob) ? 1.0 : -1.0;
    std::vector<double> a(2);
    for (int i = 0; i < 2; ++i) {
      a[i] = std::clamp(sign * spec.behavior_speed * u[i] + spec.behavior_noise * rng.normal(), -spec.max_speed,
                        spec.max_speed);
    }
    return a;
  };
}

BehaviorFn point_mass_oracle(const PointMassSpec& spec) {
  return [spec](std::span<const double> state, Rng&) {
    return std::vector<double>{std::clamp(spec.goal[0] - state[0], -spec.max_speed, spec.max_speed),
                               std::clamp(spec.goal[1] - state[1], -spec.max_speed, spec.max_speed)};
  };
}

}  // namespace osc::envs
