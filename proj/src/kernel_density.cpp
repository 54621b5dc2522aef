#include "osc/kernel_density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "osc/errors.hpp"
#include "osc/stats.hpp"

namespace osc {

void to_json(nlohmann::json& j, const KernelOptions& o) {
  j = {{"reference_size", o.reference_size}, {"min_bandwidth", o.min_bandwidth}};
}

void from_json(const nlohmann::json& j, KernelOptions& o) {
  const KernelOptions d;
  o.reference_size = j.value("reference_size", d.reference_size);
  o.min_bandwidth = j.value("min_bandwidth", d.min_bandwidth);
  require(o.reference_size >= 2, "kernel reference_size must be at least 2");
  require(o.min_bandwidth > 0.0, "kernel min_bandwidth must be positive");
}

KernelDensity::KernelDensity(const data::Dataset& dataset, const KernelOptions& options, Rng& rng)
    : state_dim_(dataset.state_dim), action_dim_(dataset.action_dim) {
  require(dataset.size() >= 2, "kernel density needs at least two transitions");
  require(action_dim_ > 0, "kernel density needs a positive action dimension");
  const std::size_t n = dataset.size();
  const std::size_t m = std::min(n, options.reference_size);
  // partial Fisher-Yates: the first m entries become a uniform subset
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  for (std::size_t i = 0; i < m; ++i) std::swap(rows[i], rows[i + rng.below(n - i)]);
  rows.resize(m);
  std::sort(rows.begin(), rows.end());
  for (std::size_t r : rows) {
    const auto s = dataset.state(r);
    const auto a = dataset.action(r);
    ref_states_.insert(ref_states_.end(), s.begin(), s.end());
    ref_actions_.insert(ref_actions_.end(), a.begin(), a.end());
  }

  const double factor = std::pow(static_cast<double>(m), -1.0 / static_cast<double>(state_dim_ + action_dim_ + 4));
  auto bandwidths = [&](const std::vector<double>& flat, std::size_t dim) {
    std::vector<double> h(dim);
    std::vector<double> column(m);
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t i = 0; i < m; ++i) column[i] = flat[i * dim + j];
      h[j] = std::max(stats::stddev(column) * factor, options.min_bandwidth);
    }
    return h;
  };
  hs_ = bandwidths(ref_states_, state_dim_);
  ha_ = bandwidths(ref_actions_, action_dim_);
  for (double h : ha_) log_norm_ += std::log(h) + 0.5 * std::log(2.0 * std::numbers::pi);
}

double KernelDensity::nll_and_gradient(const double* state, const double* action, double* grad) const {
  const std::size_t m = reference_size();
  std::vector<double> ls(m), lj(m);
  for (std::size_t i = 0; i < m; ++i) {
    double qs = 0.0, qa = 0.0;
    for (std::size_t j = 0; j < state_dim_; ++j) {
      const double z = (state[j] - ref_states_[i * state_dim_ + j]) / hs_[j];
      qs += z * z;
    }
    for (std::size_t j = 0; j < action_dim_; ++j) {
      const double z = (action[j] - ref_actions_[i * action_dim_ + j]) / ha_[j];
      qa += z * z;
    }
    ls[i] = -0.5 * qs;
    lj[i] = -0.5 * (qs + qa);
  }
  const double ms = *std::max_element(ls.begin(), ls.end());
  const double mj = *std::max_element(lj.begin(), lj.end());
  double zs = 0.0, zj = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    zs += std::exp(ls[i] - ms);
    zj += std::exp(lj[i] - mj);
  }
  if (grad) {
    std::fill_n(grad, action_dim_, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = std::exp(lj[i] - mj) / zj;
      for (std::size_t j = 0; j < action_dim_; ++j) {
        grad[j] += w * (action[j] - ref_actions_[i * action_dim_ + j]) / (ha_[j] * ha_[j]);
      }
    }
  }
  const double log_p = (mj + std::log(zj)) - (ms + std::log(zs)) - log_norm_;
  return -log_p;
}

std::vector<double> KernelDensity::nll(const grad::Array& states, const grad::Array& actions, Rng&) const {
  if (states.cols() != state_dim_ || actions.cols() != action_dim_ || states.rows() != actions.rows()) {
    throw DimensionError("kernel density: query shapes do not match the reference data");
  }
  std::vector<double> out(states.rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = nll_and_gradient(states.data() + r * state_dim_, actions.data() + r * action_dim_, nullptr);
  }
  return out;
}

grad::Var KernelDensity::record_nll(grad::Tape& tape, grad::Var actions, const grad::Array& states, Rng&) const {
  const grad::Array& a = tape.value(actions);
  if (states.cols() != state_dim_ || a.cols() != action_dim_ || states.rows() != a.rows()) {
    throw DimensionError("kernel density: query shapes do not match the reference data");
  }
  const std::size_t b = a.rows();
  grad::Array slope({b, action_dim_});
  grad::Array offset({b, 1});
  for (std::size_t r = 0; r < b; ++r) {
    const double* ar = a.data() + r * action_dim_;
    double* g = slope.data() + r * action_dim_;
    const double f = nll_and_gradient(states.data() + r * state_dim_, ar, g);
    double dot = 0.0;
    for (std::size_t j = 0; j < action_dim_; ++j) dot += g[j] * ar[j];
    offset[r] = f - dot;
  }
  grad::Array ones({action_dim_, 1});
  std::fill_n(ones.data(), action_dim_, 1.0);
  const grad::Var linear = tape.matmul(tape.mul(actions, tape.constant(std::move(slope))), tape.constant(ones));
  return tape.add(linear, tape.constant(std::move(offset)));
}

}  // namespace osc
