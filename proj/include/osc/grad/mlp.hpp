#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "osc/grad/array.hpp"
#include "osc/grad/tape.hpp"
#include "osc/rng.hpp"

namespace osc::grad {

enum class Activation { linear, relu, tanh, sigmoid };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

class Mlp;

/// Parameter leaves of a network on one tape. The first record() against an
/// empty binding creates the leaves (variables when `trainable`, constants
/// otherwise); later records on the same tape reuse them.
struct ParamBinding {
  bool trainable = false;
  std::vector<Var> params;

  std::vector<Array> gradients(const Tape& tape) const;
};

/// Result of recording an Mlp on a tape: the output node plus the leaf nodes
/// that hold its parameters, in `Mlp::parameters()` order.
struct MlpTrace {
  Var output;
  std::vector<Var> params;

  std::vector<Array> gradients(const Tape& tape) const;
};

/// Fully connected network: ReLU on hidden layers, configurable output squash.
///
/// Parameters are stored as [W0, b0, W1, b1, ...] with W_l of shape
/// (in_l, out_l) and b_l of shape (1, out_l), so a forward pass is
/// `x W + b` per layer on row-major batches.
class Mlp {
 public:
  Mlp() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation for weights and biases.
  Mlp(std::vector<std::size_t> layer_sizes, Activation output, Rng& rng);
  Mlp(std::vector<std::size_t> layer_sizes, Activation output, std::vector<Array> params);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation output_activation() const { return output_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }

  std::span<Array> parameters() { return params_; }
  std::span<const Array> parameters() const { return params_; }
  std::size_t scalar_count() const;

  /// Plain evaluation; nothing is recorded.
  Array forward(const Array& input) const;

  /// Records the forward pass. Parameters become tape variables when
  /// `trainable`, constants otherwise (useful for frozen networks whose
  /// input still needs a gradient).
  MlpTrace record(Tape& tape, Var input, bool trainable = true) const;
  /// Records the forward pass, creating or reusing the leaves in `binding`.
  Var record(Tape& tape, Var input, ParamBinding& binding) const;
  /// Records the forward pass against caller-provided parameter nodes.
  Var record_with(Tape& tape, Var input, std::span<const Var> params) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  void validate() const;

  std::vector<std::size_t> sizes_;
  Activation output_ = Activation::linear;
  std::vector<Array> params_;
};

/// Convenience for `mlp.forward` / `mlp.record` under a single name.
inline Array mlp_forward(const Mlp& mlp, const Array& input) { return mlp.forward(input); }

}  // namespace osc::grad
