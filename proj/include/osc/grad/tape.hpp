#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "osc/grad/array.hpp"

namespace osc::grad {

enum class OpKind { leaf, matmul, add, mul, relu, tanh, sigmoid, square, mean, concat, slice, scale };

const char* op_name(OpKind kind);

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Define-by-run computation graph for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the append order is already a
/// topological order and backward() walks it in reverse. Each node remembers
/// whether anything upstream of it needs a gradient; nodes built purely from
/// constants are skipped on the way back.
///
/// Broadcasting is limited to what the layers need: `add` accepts a second
/// operand that is either the same shape, a single row (bias), or a 1x1
/// scalar.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Array value);
  Var variable(Array value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var relu(Var x);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var square(Var x);
  Var mean(Var x);
  Var concat(std::span<const Var> parts);
  Var slice(Var x, std::size_t col_begin, std::size_t col_end);
  Var scale(Var x, double factor);

  /// Seeds d(loss)/d(loss) = 1 and propagates adjoints to every reachable node.
  /// Throws ContractError if `loss` is not a single element.
  void backward(Var loss);

  const Array& value(Var v) const;
  /// Adjoint after backward(); zeros for nodes the loss does not depend on.
  Array adjoint(Var v) const;
  OpKind kind(Var v) const;
  bool requires_grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  /// Number of times backward() processed the node (0 or 1 per pass).
  std::size_t visits(Var v) const;
  std::size_t total_visits() const { return total_visits_; }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<std::size_t> inputs;
    Array value;
    Array adjoint;
    double factor = 0.0;
    std::size_t begin = 0;
    bool needs_grad = false;
    bool reached = false;
    std::size_t visits = 0;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  Array& adjoint_slot(std::size_t id);
  void propagate(std::size_t id);

  std::vector<Node> nodes_;
  std::size_t total_visits_ = 0;
};

}  // namespace osc::grad
