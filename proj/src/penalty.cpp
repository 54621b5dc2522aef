#include "osc/penalty.hpp"

#include <cmath>

#include "osc/errors.hpp"

namespace osc {

void PenaltyConfig::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "penalty lambda must be finite and >= 0");
  require(std::isfinite(alpha) && alpha > 0.0, "penalty alpha must be finite and > 0");
  require(std::isfinite(eps_breve), "penalty eps_breve must be finite");
}

void to_json(nlohmann::json& j, const PenaltyConfig& cfg) {
  j = {{"lambda", cfg.lambda}, {"alpha", cfg.alpha}, {"eps_breve", cfg.eps_breve}};
}

void from_json(const nlohmann::json& j, PenaltyConfig& cfg) {
  const PenaltyConfig defaults;
  cfg.lambda = j.value("lambda", defaults.lambda);
  cfg.alpha = j.value("alpha", defaults.alpha);
  cfg.eps_breve = j.value("eps_breve", defaults.eps_breve);
  cfg.validate();
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double osc_penalty(double f, const PenaltyConfig& cfg) { return cfg.lambda * sigmoid(cfg.alpha * (cfg.eps_breve - f)); }

double osc_penalty_derivative(double f, const PenaltyConfig& cfg) {
  const double s = sigmoid(cfg.alpha * (cfg.eps_breve - f));
  return -cfg.lambda * cfg.alpha * s * (1.0 - s);
}

double indicator_penalty(double f, const PenaltyConfig& cfg) { return f < cfg.eps_breve ? cfg.lambda : 0.0; }

double spot_penalty(double f, double lambda) { return -lambda * f; }

grad::Var record_osc_penalty(grad::Tape& tape, grad::Var f, const PenaltyConfig& cfg) {
  const grad::Var shifted = tape.add(tape.scale(f, -cfg.alpha), tape.constant(grad::Array::scalar(cfg.alpha * cfg.eps_breve)));
  return tape.scale(tape.sigmoid(shifted), cfg.lambda);
}

grad::Var record_spot_penalty(grad::Tape& tape, grad::Var f, double lambda) { return tape.scale(f, -lambda); }

}  // namespace osc
