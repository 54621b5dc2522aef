#pragma once

#include "json.hpp"

#include "osc/grad/tape.hpp"

namespace osc {

/// Constraint strength lambda, sigmoid sharpness alpha and the support
/// boundary eps_breve = -log(eps), all in NLL units of F.
struct PenaltyConfig {
  double lambda = 1.0;
  double alpha = 20.0;
  double eps_breve = 0.0;

  /// ContractError unless lambda >= 0 and alpha > 0 (and both finite).
  void validate() const;

  friend bool operator==(const PenaltyConfig&, const PenaltyConfig&) = default;
};

void to_json(nlohmann::json& j, const PenaltyConfig& cfg);
void from_json(const nlohmann::json& j, PenaltyConfig& cfg);

/// Numerically stable logistic function.
double sigmoid(double x);

// Every penalty is a bonus added to Q in a maximized objective.

/// lambda * sigmoid(alpha * (eps_breve - F)).
double osc_penalty(double f, const PenaltyConfig& cfg);
/// d osc_penalty / dF = -lambda * alpha * s * (1 - s).
double osc_penalty_derivative(double f, const PenaltyConfig& cfg);
/// lambda * [F < eps_breve].
double indicator_penalty(double f, const PenaltyConfig& cfg);
/// -lambda * F.
double spot_penalty(double f, double lambda);

/// Elementwise tape versions over a column of F values.
grad::Var record_osc_penalty(grad::Tape& tape, grad::Var f, const PenaltyConfig& cfg);
grad::Var record_spot_penalty(grad::Tape& tape, grad::Var f, double lambda);

}  // namespace osc
