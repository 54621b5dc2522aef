#include "osc/grad/tape.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "osc/errors.hpp"

namespace osc::grad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Array& a) { return ConstMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols())); }
MutMap view(Array& a) { return MutMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols())); }

void check_finite(const Array& a, OpKind kind) {
  if (!a.all_finite()) throw NumericError(std::string("non-finite output from ") + op_name(kind));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::square: return "square";
    case OpKind::mean: return "mean";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::scale: return "scale";
  }
  return "unknown";
}

Var Tape::push(Node n) {
  check_finite(n.value, n.kind);
  for (std::size_t in : n.inputs) n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("Tape: variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::constant(Array value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Array value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Array& x = node(a).value;
  const Array& w = node(b).value;
  if (x.cols() != w.rows()) {
    throw DimensionError("matmul: " + shape_string(x.shape()) + " x " + shape_string(w.shape()));
  }
  Node n;
  n.kind = OpKind::matmul;
  n.inputs = {a.id, b.id};
  n.value = Array({x.rows(), w.cols()});
  view(n.value).noalias() = view(x) * view(w);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Array& x = node(a).value;
  const Array& y = node(b).value;
  const bool same = x.same_shape(y);
  const bool row = y.rows() == 1 && y.cols() == x.cols();
  const bool scalar = y.size() == 1;
  if (!same && !row && !scalar) {
    throw DimensionError("add: " + shape_string(x.shape()) + " + " + shape_string(y.shape()));
  }
  Node n;
  n.kind = OpKind::add;
  n.inputs = {a.id, b.id};
  n.value = Array({x.rows(), x.cols()}, std::vector<double>(x.values().begin(), x.values().end()));
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    n.value[i] += same ? y[i] : (scalar ? y[0] : y[i % cols]);
  }
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::mul(Var a, Var b) {
  const Array& x = node(a).value;
  const Array& y = node(b).value;
  if (!x.same_shape(y)) {
    throw DimensionError("mul: " + shape_string(x.shape()) + " * " + shape_string(y.shape()));
  }
  Node n;
  n.kind = OpKind::mul;
  n.inputs = {a.id, b.id};
  n.value = Array({x.rows(), x.cols()});
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * y[i];
  return push(std::move(n));
}

namespace {

template <class F>
Array map_values(const Array& x, F f) {
  Array out({x.rows(), x.cols()});
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var Tape::relu(Var x) {
  Node n;
  n.kind = OpKind::relu;
  n.inputs = {x.id};
  n.value = map_values(node(x).value, [](double v) { return v > 0.0 ? v : 0.0; });
  return push(std::move(n));
}

Var Tape::tanh(Var x) {
  Node n;
  n.kind = OpKind::tanh;
  n.inputs = {x.id};
  n.value = map_values(node(x).value, [](double v) { return std::tanh(v); });
  return push(std::move(n));
}

Var Tape::sigmoid(Var x) {
  Node n;
  n.kind = OpKind::sigmoid;
  n.inputs = {x.id};
  n.value = map_values(node(x).value, stable_sigmoid);
  return push(std::move(n));
}

Var Tape::square(Var x) {
  Node n;
  n.kind = OpKind::square;
  n.inputs = {x.id};
  n.value = map_values(node(x).value, [](double v) { return v * v; });
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  const Array& v = node(x).value;
  double total = 0.0;
  for (double e : v.values()) total += e;
  Node n;
  n.kind = OpKind::mean;
  n.inputs = {x.id};
  n.value = Array::scalar(total / static_cast<double>(v.size()));
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const std::size_t rows = node(parts[0]).value.rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    const Array& v = node(p).value;
    if (v.rows() != rows) throw DimensionError("concat: row count mismatch");
    cols += v.cols();
  }
  Node n;
  n.kind = OpKind::concat;
  n.value = Array({rows, cols});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Array& v = node(p).value;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) n.value(r, offset + c) = v(r, c);
    }
    offset += v.cols();
    n.inputs.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::slice(Var x, std::size_t col_begin, std::size_t col_end) {
  const Array& v = node(x).value;
  if (col_begin >= col_end || col_end > v.cols()) {
    throw DimensionError("slice: columns [" + std::to_string(col_begin) + ", " + std::to_string(col_end) +
                         ") of " + shape_string(v.shape()));
  }
  Node n;
  n.kind = OpKind::slice;
  n.inputs = {x.id};
  n.begin = col_begin;
  n.value = Array({v.rows(), col_end - col_begin});
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = col_begin; c < col_end; ++c) n.value(r, c - col_begin) = v(r, c);
  }
  return push(std::move(n));
}

Var Tape::scale(Var x, double factor) {
  Node n;
  n.kind = OpKind::scale;
  n.inputs = {x.id};
  n.factor = factor;
  n.value = map_values(node(x).value, [factor](double v) { return factor * v; });
  return push(std::move(n));
}

Array& Tape::adjoint_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.reached) {
    n.adjoint = Array::zeros_like(n.value);
    n.reached = true;
  }
  return n.adjoint;
}

void Tape::backward(Var loss) {
  if (node(loss).value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(node(loss).value.shape()));
  }
  for (Node& n : nodes_) {
    n.reached = false;
    n.adjoint = Array();
  }
  adjoint_slot(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (nodes_[id].reached && nodes_[id].needs_grad) propagate(id);
  }
}

void Tape::propagate(std::size_t id) {
  Node& n = nodes_[id];
  ++n.visits;
  ++total_visits_;
  if (n.kind == OpKind::leaf) return;

  // nodes_ does not grow during backward, so references into it stay valid.
  const Array& g = n.adjoint;
  const auto wants = [this](std::size_t in) { return nodes_[in].needs_grad; };

  switch (n.kind) {
    case OpKind::matmul: {
      const std::size_t a = n.inputs[0], b = n.inputs[1];
      if (wants(a)) view(adjoint_slot(a)).noalias() += view(g) * view(nodes_[b].value).transpose();
      if (wants(b)) view(adjoint_slot(b)).noalias() += view(nodes_[a].value).transpose() * view(g);
      break;
    }
    case OpKind::add: {
      const std::size_t a = n.inputs[0], b = n.inputs[1];
      if (wants(a)) {
        Array& da = adjoint_slot(a);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (wants(b)) {
        Array& db = adjoint_slot(b);
        if (db.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
        } else if (db.size() == 1) {
          double total = 0.0;
          for (double v : g.values()) total += v;
          db[0] += total;
        } else {
          const std::size_t cols = g.cols();
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) db[c] += g(r, c);
          }
        }
      }
      break;
    }
    case OpKind::mul: {
      const std::size_t a = n.inputs[0], b = n.inputs[1];
      if (wants(a)) {
        Array& da = adjoint_slot(a);
        const Array& y = nodes_[b].value;
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
      }
      if (wants(b)) {
        Array& db = adjoint_slot(b);
        const Array& x = nodes_[a].value;
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
      }
      break;
    }
    case OpKind::relu: {
      Array& dx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (n.value[i] > 0.0) dx[i] += g[i];
      }
      break;
    }
    case OpKind::tanh: {
      Array& dx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::sigmoid: {
      Array& dx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case OpKind::square: {
      Array& dx = adjoint_slot(n.inputs[0]);
      const Array& x = nodes_[n.inputs[0]].value;
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += 2.0 * x[i] * g[i];
      break;
    }
    case OpKind::mean: {
      Array& dx = adjoint_slot(n.inputs[0]);
      const double share = g[0] / static_cast<double>(dx.size());
      for (double& v : dx.values()) v += share;
      break;
    }
    case OpKind::concat: {
      std::size_t offset = 0;
      for (std::size_t in : n.inputs) {
        const std::size_t width = nodes_[in].value.cols();
        if (wants(in)) {
          Array& dx = adjoint_slot(in);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < width; ++c) dx(r, c) += g(r, offset + c);
          }
        }
        offset += width;
      }
      break;
    }
    case OpKind::slice: {
      Array& dx = adjoint_slot(n.inputs[0]);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) dx(r, n.begin + c) += g(r, c);
      }
      break;
    }
    case OpKind::scale: {
      Array& dx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += n.factor * g[i];
      break;
    }
    case OpKind::leaf:
      break;
  }
}

const Array& Tape::value(Var v) const { return node(v).value; }

Array Tape::adjoint(Var v) const {
  const Node& n = node(v);
  return n.reached ? n.adjoint : Array::zeros_like(n.value);
}

OpKind Tape::kind(Var v) const { return node(v).kind; }
bool Tape::requires_grad(Var v) const { return node(v).needs_grad; }
std::size_t Tape::visits(Var v) const { return node(v).visits; }

}  // namespace osc::grad
