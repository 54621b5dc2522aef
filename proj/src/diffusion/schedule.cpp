#include "osc/diffusion/schedule.hpp"

#include <cmath>

#include "osc/errors.hpp"

namespace osc::diffusion {

VarianceSchedule::VarianceSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  require(!betas_.empty(), "variance schedule needs at least one step");
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    require(betas_[i] > 0.0 && betas_[i] < 1.0, "betas must lie in (0, 1)");
    if (i > 0) require(betas_[i] > betas_[i - 1], "betas must be strictly increasing");
  }
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double a = 1.0 - betas_[i];
    const double previous = running;
    running *= a;
    alphas_.push_back(a);
    alpha_bars_.push_back(running);
    posterior_.push_back((1.0 - previous) / (1.0 - running) * betas_[i]);
  }
}

void VarianceSchedule::check_t(int t) const {
  if (t < 1 || t > steps()) {
    throw ContractError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
}

double VarianceSchedule::beta(int t) const {
  check_t(t);
  return betas_[t - 1];
}

double VarianceSchedule::alpha(int t) const {
  check_t(t);
  return alphas_[t - 1];
}

double VarianceSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check_t(t);
  return alpha_bars_[t - 1];
}

double VarianceSchedule::posterior_variance(int t) const {
  check_t(t);
  return posterior_[t - 1];
}

nlohmann::json VarianceSchedule::to_json() const {
  return {{"T", steps()}, {"beta_min", betas_.front()}, {"beta_max", betas_.back()}, {"betas", betas_}};
}

VarianceSchedule VarianceSchedule::from_json(const nlohmann::json& j) {
  if (j.contains("betas")) return VarianceSchedule(j.at("betas").get<std::vector<double>>());
  return make_schedule(j.at("T").get<int>(), j.at("beta_min").get<double>(), j.at("beta_max").get<double>());
}

VarianceSchedule make_schedule(int steps, double beta_min, double beta_max) {
  require(steps >= 1, "schedule needs T >= 1");
  require(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0, "schedule needs 0 < beta_min < beta_max < 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    betas[i] = steps == 1 ? beta_min : beta_min + (beta_max - beta_min) * i / (steps - 1);
  }
  return VarianceSchedule(std::move(betas));
}

grad::Array forward_noise(const VarianceSchedule& schedule, const grad::Array& x0, int t, const grad::Array& eps) {
  if (!x0.same_shape(eps)) throw DimensionError("forward_noise: x0 and eps shapes differ");
  const double signal = std::sqrt(schedule.alpha_bar(t));
  const double noise = std::sqrt(1.0 - schedule.alpha_bar(t));
  grad::Array out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal * x0[i] + noise * eps[i];
  return out;
}

}  // namespace osc::diffusion
