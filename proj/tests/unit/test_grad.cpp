#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "osc/errors.hpp"
#include "osc/grad/adam.hpp"
#include "osc/grad/checkpoint.hpp"
#include "osc/grad/gradcheck.hpp"
#include "osc/grad/mlp.hpp"
#include "osc/grad/tape.hpp"
#include "osc/io.hpp"

using namespace osc;
using namespace osc::grad;

namespace {

Array random_array(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array a({rows, cols});
  for (double& v : a.values()) v = rng.uniform(lo, hi);
  return a;
}

// Uniform away from zero so ReLU/abs-like kinks are never within the FD step.
Array away_from_zero(std::size_t rows, std::size_t cols, Rng& rng) {
  Array a({rows, cols});
  for (double& v : a.values()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.05, 1.0);
  return a;
}

// Pre-activations of every hidden unit stay at least `margin` from zero.
bool kink_free(const Mlp& mlp, const Array& input, double margin) {
  Array h = input;
  for (std::size_t l = 0; l + 1 < mlp.layer_count(); ++l) {
    const Mlp single({mlp.layer_sizes()[l], mlp.layer_sizes()[l + 1]}, Activation::linear,
                     {mlp.parameters()[2 * l], mlp.parameters()[2 * l + 1]});
    const Array z = single.forward(h);
    for (double v : z.values()) {
      if (std::abs(v) < margin) return false;
    }
    h = z;
    for (double& v : h.values()) v = std::max(v, 0.0);
  }
  return true;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "osc_test_grad";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("identity network passes inputs through") {
  const Mlp net({3, 3}, Activation::linear,
                {Array::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Array::row({0, 0, 0})});
  const Array out = net.forward(Array::row({1, 2, 3}));
  CHECK(out == Array::row({1, 2, 3}));
}

TEST_CASE("single affine unit") {
  const Mlp net({1, 1}, Activation::linear, {Array::matrix(1, 1, {2}), Array::row({1})});
  CHECK(net.forward(Array::row({3})).item() == 7.0);
}

TEST_CASE("batched forward keeps the batch dimension") {
  Rng rng(1);
  const Mlp net({5, 16, 16, 3}, Activation::tanh, rng);
  const Array out = net.forward(random_array(4, 5, rng));
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 3);
  for (double v : out.values()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("recorded and plain forward agree") {
  Rng rng(2);
  const Mlp net({4, 8, 2}, Activation::sigmoid, rng);
  const Array x = random_array(6, 4, rng);
  Tape tape;
  const MlpTrace trace = net.record(tape, tape.constant(x));
  const Array& recorded = tape.value(trace.output);
  const Array plain = net.forward(x);
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(recorded[i] == doctest::Approx(plain[i]).epsilon(1e-14));
}

TEST_CASE("forward rejects wrong input width and non-finite outputs") {
  Rng rng(3);
  const Mlp net({2, 4, 1}, Activation::linear, rng);
  CHECK_THROWS_AS(net.forward(Array::row({1, 2, 3})), DimensionError);
  const Mlp huge({1, 1}, Activation::linear, {Array::matrix(1, 1, {1e308}), Array::row({0})});
  CHECK_THROWS_AS(huge.forward(Array::row({10})), NumericError);
  Tape tape;
  CHECK_THROWS_AS(huge.record(tape, tape.constant(Array::row({10}))), NumericError);
}

TEST_CASE("array rejects inconsistent shapes") {
  CHECK_THROWS_AS(Array({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Array({0, 2}), DimensionError);
  CHECK_THROWS_AS(Array::row({1.0, std::numeric_limits<double>::infinity()}), NumericError);
}

TEST_CASE("hand-differentiated mean(square(w x))") {
  Tape tape;
  const Var w = tape.variable(Array::scalar(1.0));
  const Var x = tape.constant(Array::scalar(2.0));
  const Var loss = tape.mean(tape.square(tape.matmul(w, x)));
  tape.backward(loss);
  CHECK(tape.adjoint(w).item() == 8.0);
}

TEST_CASE("parameters the loss ignores get zero gradient") {
  Tape tape;
  const Var used = tape.variable(Array::row({1.0, 2.0}));
  const Var unused = tape.variable(Array::row({5.0, 6.0}));
  tape.backward(tape.mean(tape.square(used)));
  CHECK(tape.adjoint(unused) == Array::row({0.0, 0.0}));
  CHECK(tape.adjoint(used) == Array::row({1.0, 2.0}));
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  const Var v = tape.variable(Array::row({1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(tape.square(v)), ContractError);
}

TEST_CASE("operand shape errors") {
  Tape tape;
  const Var a = tape.constant(Array::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  const Var b = tape.constant(Array::matrix(2, 2, {1, 2, 3, 4}));
  CHECK_THROWS_AS(tape.matmul(a, a), DimensionError);
  CHECK_THROWS_AS(tape.add(a, b), DimensionError);
  CHECK_THROWS_AS(tape.mul(a, b), DimensionError);
  CHECK_THROWS_AS(tape.slice(a, 2, 5), DimensionError);
  CHECK_THROWS_AS(tape.slice(a, 1, 1), DimensionError);
}

TEST_CASE("every op-kind matches central finite differences") {
  Rng rng(11);
  GradCheckOptions opts;
  opts.samples = 0;
  using Builder = std::function<Var(Tape&, std::span<const Var>)>;
  // Each case reduces through a fixed random projection so adjoints are not uniform.
  const Array probe = random_array(3, 4, rng);
  const auto reduce = [&probe](Tape& t, Var v) {
    const Array& val = t.value(v);
    Array weights({val.rows(), val.cols()});
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = probe[i % probe.size()];
    return t.mean(t.mul(v, t.constant(weights)));
  };
  const std::vector<std::pair<const char*, Builder>> cases = {
      {"matmul", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.matmul(p[0], p[1])); }},
      {"add", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.add(p[0], p[2])); }},
      {"add-row", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.add(p[0], p[3])); }},
      {"add-scalar", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.add(p[0], p[4])); }},
      {"mul", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.mul(p[0], p[2])); }},
      {"relu", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.relu(p[0])); }},
      {"tanh", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.tanh(p[0])); }},
      {"sigmoid", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.sigmoid(p[0])); }},
      {"square", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.square(p[0])); }},
      {"mean", [&](Tape& t, std::span<const Var> p) { return t.mean(t.square(t.mean(p[0]))); }},
      {"concat", [&](Tape& t, std::span<const Var> p) {
         const Var parts[] = {p[0], p[2]};
         return reduce(t, t.square(t.concat(parts)));
       }},
      {"slice", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.square(t.slice(p[0], 1, 3))); }},
      {"scale", [&](Tape& t, std::span<const Var> p) { return reduce(t, t.scale(t.square(p[0]), -2.5)); }},
  };
  for (const auto& [name, build] : cases) {
    std::vector<Array> params = {away_from_zero(3, 4, rng), away_from_zero(4, 2, rng), away_from_zero(3, 4, rng),
                                 away_from_zero(1, 4, rng), away_from_zero(1, 1, rng)};
    const GradCheckReport report = grad_check(params, build, 1e-5, opts, rng);
    INFO(name << " max relative error " << report.max_relative_error);
    CHECK(report.passed);
  }
}

TEST_CASE("random two-layer MLP gradients match finite differences") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mlp net({3, 12, 2}, Activation::tanh, rng);
    Array x = random_array(4, 3, rng);
    while (!kink_free(net, x, 1e-3)) x = random_array(4, 3, rng);
    const GradCheckReport report = grad_check(
        net, x, [](Tape& t, Var out) { return t.mean(t.square(out)); }, 1e-5, GradCheckOptions{}, rng);
    CHECK(report.checked == 64);
    CHECK(report.max_relative_error < 1e-5);
  }
}

TEST_CASE("grad_check on a linear net with quadratic loss is exact to roundoff") {
  Rng rng(6);
  Mlp net({3, 2}, Activation::linear, rng);
  const Array x = random_array(5, 3, rng);
  GradCheckOptions opts;
  opts.samples = 0;
  const GradCheckReport report =
      grad_check(net, x, [](Tape& t, Var out) { return t.mean(t.square(out)); }, 1e-8, opts, rng);
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("grad_check on a relu net at a kink-free point") {
  Rng rng(7);
  Mlp net({4, 16, 16, 1}, Activation::linear, rng);
  Array x = random_array(3, 4, rng);
  while (!kink_free(net, x, 1e-3)) x = random_array(3, 4, rng);
  const GradCheckReport report =
      grad_check(net, x, [](Tape& t, Var out) { return t.mean(t.square(out)); }, 1e-5, GradCheckOptions{}, rng);
  CHECK(report.passed);
}

TEST_CASE("grad_check with zero tolerance always fails") {
  Rng rng(8);
  Mlp net({2, 4, 1}, Activation::tanh, rng);
  const GradCheckReport report = grad_check(
      net, random_array(2, 2, rng), [](Tape& t, Var out) { return t.mean(t.square(out)); }, 0.0,
      GradCheckOptions{}, rng);
  CHECK_FALSE(report.passed);
}

TEST_CASE("backward visits each reachable node exactly once") {
  Rng rng(9);
  const Mlp net({3, 8, 8, 2}, Activation::tanh, rng);
  Tape tape;
  const MlpTrace trace = net.record(tape, tape.constant(random_array(5, 3, rng)));
  const Var shared = tape.square(trace.output);
  // `shared` feeds two consumers; it still must be processed once.
  const Var loss = tape.mean(tape.add(shared, tape.scale(shared, 0.5)));
  tape.backward(loss);
  std::size_t processed = 0;
  for (std::size_t id = 0; id < tape.size(); ++id) {
    const Var v{id};
    CHECK(tape.visits(v) <= 1);
    if (tape.requires_grad(v)) {
      CHECK(tape.visits(v) == 1);
    } else {
      CHECK(tape.visits(v) == 0);
    }
    processed += tape.visits(v);
  }
  CHECK(processed == tape.total_visits());
}

TEST_CASE("adam: zero gradient leaves parameters fixed") {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    Mlp net({3, 5, 2}, Activation::linear, rng);
    const Mlp before = net;
    AdamState state(net.parameters(), AdamConfig{0.1});
    std::vector<Array> zeros;
    for (const Array& p : net.parameters()) zeros.push_back(Array::zeros_like(p));
    for (int s = 0; s < 10; ++s) adam_step(net.parameters(), zeros, state);
    CHECK(net == before);
    CHECK(state.step == 10);
  }
}

TEST_CASE("adam: first step moves by the learning rate") {
  std::vector<Array> p = {Array::scalar(0.0)};
  AdamState state(p, AdamConfig{0.1});
  adam_step(p, std::vector<Array>{Array::scalar(1.0)}, state);
  CHECK(p[0].item() == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(state.step == 1);
}

TEST_CASE("adam: quadratic descent matches the scalar recurrence") {
  // Scalar Adam written out directly, independent of adam_step.
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double w_ref = 0.0, m = 0.0, v = 0.0;
  std::vector<Array> p = {Array::scalar(0.0)};
  AdamState state(p, AdamConfig{lr, b1, b2, eps});
  double early_mean = 0.0, late_mean = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * (w_ref - 3.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    w_ref -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);

    adam_step(p, std::vector<Array>{Array::scalar(2.0 * (p[0].item() - 3.0))}, state);
    CHECK(p[0].item() == doctest::Approx(w_ref).epsilon(1e-12));
    const double gap = std::abs(p[0].item() - 3.0);
    if (t <= 20) early_mean += gap / 20.0;
    if (t > 80) late_mean += gap / 20.0;
  }
  CHECK(late_mean < early_mean);
  CHECK(std::abs(p[0].item() - 3.0) < 0.5);
}

TEST_CASE("adam rejects mismatched gradients") {
  std::vector<Array> p = {Array::row({1.0, 2.0})};
  AdamState state(p, AdamConfig{});
  CHECK_THROWS_AS(adam_step(p, std::vector<Array>{Array::scalar(1.0)}, state), DimensionError);
  CHECK_THROWS_AS(adam_step(p, std::vector<Array>{}, state), DimensionError);
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  Rng rng(12);
  const Mlp net({3, 7, 2}, Activation::tanh, rng);
  const auto path = temp_path("net.ckpt");
  save_checkpoint(path, net, {{"note", "unit"}});
  nlohmann::json extra;
  const Mlp loaded = load_checkpoint(path, &extra);
  CHECK(loaded == net);
  CHECK(extra["note"] == "unit");
}

TEST_CASE("checkpoint errors: truncation and version mismatch") {
  Rng rng(13);
  const Mlp net({2, 3, 1}, Activation::linear, rng);
  const auto path = temp_path("trunc.ckpt");
  save_checkpoint(path, net);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  save_checkpoint(path, net);
  io::FramedFile file = io::read_framed(path);
  file.header["format_version"] = 99;
  io::write_framed(path, file.header, file.payload);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.ckpt")), FormatError);
}
