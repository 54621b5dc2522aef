#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

#include "osc/data/dataset.hpp"
#include "osc/density.hpp"
#include "osc/rng.hpp"

namespace osc {

struct KernelOptions {
  /// Reference rows kept from the dataset (all rows when the dataset is smaller).
  std::size_t reference_size = 2000;
  /// Lower bound on each per-dimension bandwidth.
  double min_bandwidth = 1e-3;
};

void to_json(nlohmann::json& j, const KernelOptions& o);
void from_json(const nlohmann::json& j, KernelOptions& o);

/// Conditional Gaussian kernel estimate
///   p(a|s) = sum_i K_s(s - s_i) K_a(a - a_i) / sum_i K_s(s - s_i)
/// with diagonal fixed bandwidths from Scott's rule, h_j = sigma_j n^(-1/(d+4))
/// over the joint (s, a) dimension d. F = -log p(a|s).
///
/// On the tape F enters through its first-order expansion at the current
/// actions: the recorded value is exact and the gradient is the analytic one.
class KernelDensity final : public BehaviorDensity {
 public:
  KernelDensity(const data::Dataset& dataset, const KernelOptions& options, Rng& rng);

  std::size_t reference_size() const { return ref_states_.size() / state_dim_; }
  const std::vector<double>& state_bandwidths() const { return hs_; }
  const std::vector<double>& action_bandwidths() const { return ha_; }

  /// F and dF/da for one query.
  double nll_and_gradient(const double* state, const double* action, double* grad) const;

  grad::Var record_nll(grad::Tape& tape, grad::Var actions, const grad::Array& states, Rng& rng) const override;
  std::vector<double> nll(const grad::Array& states, const grad::Array& actions, Rng& rng) const override;

 private:
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::vector<double> ref_states_;
  std::vector<double> ref_actions_;
  std::vector<double> hs_;
  std::vector<double> ha_;
  double log_norm_ = 0.0;
};

}  // namespace osc
