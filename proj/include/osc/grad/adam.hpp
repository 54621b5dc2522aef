#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "osc/grad/array.hpp"

namespace osc::grad {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::span<const Array> params, AdamConfig config);

  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Array> first_moment;
  std::vector<Array> second_moment;
};

/// One bias-corrected Adam update, in place. Throws DimensionError when the
/// gradient list does not mirror the parameter list and NumericError if an
/// update would leave a non-finite parameter (parameters are untouched then).
void adam_step(std::span<Array> params, std::span<const Array> grads, AdamState& state);

}  // namespace osc::grad
