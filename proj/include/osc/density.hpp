#pragma once

#include <vector>

#include "osc/grad/array.hpp"
#include "osc/grad/tape.hpp"
#include "osc/rng.hpp"

namespace osc {

/// Estimator of F(a|s) ~ -log pi_beta(a|s) in normalized action space.
///
/// `record_nll` must return a (B x 1) node whose gradient reaches `actions`;
/// any Monte-Carlo draws it makes are constants of the recording.
class BehaviorDensity {
 public:
  virtual ~BehaviorDensity() = default;

  virtual grad::Var record_nll(grad::Tape& tape, grad::Var actions, const grad::Array& states, Rng& rng) const = 0;
  virtual std::vector<double> nll(const grad::Array& states, const grad::Array& actions, Rng& rng) const = 0;
};

}  // namespace osc
