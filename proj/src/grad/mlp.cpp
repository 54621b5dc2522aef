#include "osc/grad/mlp.hpp"

#include <Eigen/Core>
#include <cmath>

#include "osc/errors.hpp"

namespace osc::grad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Var activate(Tape& tape, Var x, Activation a) {
  switch (a) {
    case Activation::linear: return x;
    case Activation::relu: return tape.relu(x);
    case Activation::tanh: return tape.tanh(x);
    case Activation::sigmoid: return tape.sigmoid(x);
  }
  return x;
}

void activate_in_place(RowMatrix& m, Activation a) {
  switch (a) {
    case Activation::linear: break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.unaryExpr([](double v) { return std::tanh(v); }); break;
    case Activation::sigmoid:
      m = m.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
      break;
  }
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "linear";
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ContractError("unknown activation '" + name + "'");
}

std::vector<Array> MlpTrace::gradients(const Tape& tape) const {
  std::vector<Array> out;
  out.reserve(params.size());
  for (Var p : params) out.push_back(tape.adjoint(p));
  return out;
}

std::vector<Array> ParamBinding::gradients(const Tape& tape) const {
  std::vector<Array> out;
  out.reserve(params.size());
  for (Var p : params) out.push_back(tape.adjoint(p));
  return out;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation output, Rng& rng)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw DimensionError("Mlp: need at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    Array w({sizes_[l], sizes_[l + 1]});
    Array b({1, sizes_[l + 1]});
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    for (double& v : b.values()) v = rng.uniform(-bound, bound);
    params_.push_back(std::move(w));
    params_.push_back(std::move(b));
  }
  validate();
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation output, std::vector<Array> params)
    : sizes_(std::move(layer_sizes)), output_(output), params_(std::move(params)) {
  validate();
}

void Mlp::validate() const {
  if (sizes_.size() < 2) throw DimensionError("Mlp: need at least input and output sizes");
  if (params_.size() != 2 * (sizes_.size() - 1)) throw DimensionError("Mlp: parameter count does not match layers");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const Array& w = params_[2 * l];
    const Array& b = params_[2 * l + 1];
    if (w.rows() != sizes_[l] || w.cols() != sizes_[l + 1] || b.rows() != 1 || b.cols() != sizes_[l + 1]) {
      throw DimensionError("Mlp: layer " + std::to_string(l) + " has weight " + shape_string(w.shape()) +
                           " and bias " + shape_string(b.shape()));
    }
  }
}

std::size_t Mlp::scalar_count() const {
  std::size_t n = 0;
  for (const Array& p : params_) n += p.size();
  return n;
}

Array Mlp::forward(const Array& input) const {
  if (input.cols() != input_dim()) {
    throw DimensionError("Mlp::forward: input " + shape_string(input.shape()) + " but network expects " +
                         std::to_string(input_dim()) + " features");
  }
  const auto rows = static_cast<Eigen::Index>(input.rows());
  RowMatrix h = Eigen::Map<const RowMatrix>(input.data(), rows, static_cast<Eigen::Index>(input.cols()));
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const Array& w = params_[2 * l];
    const Array& b = params_[2 * l + 1];
    const Eigen::Map<const RowMatrix> wm(w.data(), static_cast<Eigen::Index>(w.rows()), static_cast<Eigen::Index>(w.cols()));
    const Eigen::Map<const Eigen::RowVectorXd> bm(b.data(), static_cast<Eigen::Index>(b.cols()));
    RowMatrix next = h * wm;
    next.rowwise() += bm;
    activate_in_place(next, l + 1 == layer_count() ? output_ : Activation::relu);
    h = std::move(next);
  }
  if (!h.allFinite()) throw NumericError("Mlp::forward: non-finite output");
  return Array({input.rows(), output_dim()}, std::vector<double>(h.data(), h.data() + h.size()));
}

MlpTrace Mlp::record(Tape& tape, Var input, bool trainable) const {
  MlpTrace trace;
  trace.params.reserve(params_.size());
  for (const Array& p : params_) trace.params.push_back(trainable ? tape.variable(p) : tape.constant(p));
  trace.output = record_with(tape, input, trace.params);
  return trace;
}

Var Mlp::record(Tape& tape, Var input, ParamBinding& binding) const {
  if (binding.params.empty()) {
    for (const Array& p : params_) binding.params.push_back(binding.trainable ? tape.variable(p) : tape.constant(p));
  }
  return record_with(tape, input, binding.params);
}

Var Mlp::record_with(Tape& tape, Var input, std::span<const Var> params) const {
  if (params.size() != params_.size()) throw DimensionError("Mlp::record_with: wrong parameter count");
  if (tape.value(input).cols() != input_dim()) {
    throw DimensionError("Mlp::record: input " + shape_string(tape.value(input).shape()) +
                         " but network expects " + std::to_string(input_dim()) + " features");
  }
  Var h = input;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    h = tape.add(tape.matmul(h, params[2 * l]), params[2 * l + 1]);
    h = activate(tape, h, l + 1 == layer_count() ? output_ : Activation::relu);
  }
  return h;
}

}  // namespace osc::grad
