#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "osc/grad/array.hpp"
#include "osc/grad/mlp.hpp"
#include "osc/grad/tape.hpp"
#include "osc/rng.hpp"

namespace osc::grad {

struct GradCheckOptions {
  double step = 1e-5;
  /// Number of scalar parameters to probe; 0 probes every one.
  std::size_t samples = 64;
  /// Denominator floor of the relative error, so entries whose true
  /// derivative is ~0 are compared in absolute terms.
  double floor = 1e-4;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Builds a scalar loss from parameter leaves.
using ParamLoss = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares backward() against central finite differences on a random subset
/// of scalar parameters. Passes when the largest relative discrepancy
/// |g - fd| / max(|g|, |fd|, floor) is strictly below `tolerance`.
GradCheckReport grad_check(std::span<Array> params, const ParamLoss& loss, double tolerance,
                           const GradCheckOptions& options, Rng& rng);

/// Same check for an MLP whose output at `input` is reduced to a scalar by `head`.
GradCheckReport grad_check(Mlp& mlp, const Array& input, const std::function<Var(Tape&, Var)>& head,
                           double tolerance, const GradCheckOptions& options, Rng& rng);

double relative_error(double analytic, double numeric, double floor);

}  // namespace osc::grad
