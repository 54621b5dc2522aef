#include "osc/grad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace osc::grad {
namespace {

double evaluate(std::span<Array> params, const ParamLoss& loss) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Array& p : params) leaves.push_back(tape.constant(p));
  return tape.value(loss(tape, leaves)).item();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(std::span<Array> params, const ParamLoss& loss, double tolerance,
                           const GradCheckOptions& options, Rng& rng) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Array& p : params) leaves.push_back(tape.variable(p));
  tape.backward(loss(tape, leaves));

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) coords.emplace_back(i, k);
  }
  if (options.samples != 0 && options.samples < coords.size()) {
    // Partial Fisher-Yates: the first `samples` entries become a uniform subset.
    for (std::size_t j = 0; j < options.samples; ++j) {
      std::swap(coords[j], coords[j + rng.below(coords.size() - j)]);
    }
    coords.resize(options.samples);
  }

  GradCheckReport report;
  for (auto [i, k] : coords) {
    const double analytic = tape.adjoint(leaves[i])[k];
    const double original = params[i][k];
    params[i][k] = original + options.step;
    const double up = evaluate(params, loss);
    params[i][k] = original - options.step;
    const double down = evaluate(params, loss);
    params[i][k] = original;
    const double numeric = (up - down) / (2.0 * options.step);
    report.max_relative_error = std::max(report.max_relative_error, relative_error(analytic, numeric, options.floor));
    ++report.checked;
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

GradCheckReport grad_check(Mlp& mlp, const Array& input, const std::function<Var(Tape&, Var)>& head,
                           double tolerance, const GradCheckOptions& options, Rng& rng) {
  const Mlp& shape = mlp;
  ParamLoss loss = [&](Tape& tape, std::span<const Var> leaves) {
    const Var x = tape.constant(input);
    return head(tape, shape.record_with(tape, x, leaves));
  };
  return grad_check(mlp.parameters(), loss, tolerance, options, rng);
}

}  // namespace osc::grad
