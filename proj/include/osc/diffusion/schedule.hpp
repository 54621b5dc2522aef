#pragma once

#include <vector>

#include "json.hpp"

#include "osc/grad/array.hpp"

namespace osc::diffusion {

/// Forward-process variance schedule beta_1..beta_T with its derived
/// sequences. Timesteps are 1-based throughout; alpha_bar(0) == 1.
class VarianceSchedule {
 public:
  /// betas must satisfy 0 < beta_1 < ... < beta_T < 1 (ContractError otherwise).
  explicit VarianceSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;
  /// (1 - alpha_bar(t-1)) / (1 - alpha_bar(t)) * beta(t); zero at t = 1.
  double posterior_variance(int t) const;

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  nlohmann::json to_json() const;
  static VarianceSchedule from_json(const nlohmann::json& j);

 private:
  void check_t(int t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> posterior_;
};

/// Linearly spaced betas from beta_min to beta_max (a single step uses beta_min).
VarianceSchedule make_schedule(int steps, double beta_min, double beta_max);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
grad::Array forward_noise(const VarianceSchedule& schedule, const grad::Array& x0, int t, const grad::Array& eps);

}  // namespace osc::diffusion
