#include "osc/grad/adam.hpp"

#include <cmath>

#include "osc/errors.hpp"

namespace osc::grad {

AdamState::AdamState(std::span<const Array> params, AdamConfig cfg) : config(cfg) {
  for (const Array& p : params) {
    first_moment.push_back(Array::zeros_like(p));
    second_moment.push_back(Array::zeros_like(p));
  }
}

void adam_step(std::span<Array> params, std::span<const Array> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment lists differ in length");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i])) {
      throw DimensionError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": " +
                           shape_string(params[i].shape()) + " vs gradient " + shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) throw NumericError("adam_step: non-finite gradient");
  }

  const AdamConfig& c = state.config;
  const std::uint64_t t = state.step + 1;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));

  std::vector<Array> m = state.first_moment;
  std::vector<Array> v = state.second_moment;
  std::vector<Array> updated(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double g = grads[i][k];
      m[i][k] = c.beta1 * m[i][k] + (1.0 - c.beta1) * g;
      v[i][k] = c.beta2 * v[i][k] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i][k] / correction1;
      const double v_hat = v[i][k] / correction2;
      updated[i][k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    if (!updated[i].all_finite()) throw NumericError("adam_step: update produced a non-finite parameter");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] = std::move(updated[i]);
  state.first_moment = std::move(m);
  state.second_moment = std::move(v);
  state.step = t;
}

}  // namespace osc::grad
