#include "osc/diffusion/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "osc/errors.hpp"
#include "osc/grad/checkpoint.hpp"

namespace osc::diffusion {

using grad::Array;
using grad::Tape;
using grad::Var;

namespace {

constexpr std::size_t kPredictChunk = 4096;

void check_batch(const EpsilonPredictor& p, const Array& states, const Array& actions, const char* where) {
  if (states.cols() != p.state_dim() || actions.cols() != p.action_dim() || states.rows() != actions.rows()) {
    throw DimensionError(std::string(where) + ": expected states (B x " + std::to_string(p.state_dim()) +
                         ") and actions (B x " + std::to_string(p.action_dim()) + "), got " +
                         grad::shape_string(states.shape()) + " and " + grad::shape_string(actions.shape()));
  }
}

int draw_timestep(const VarianceSchedule& schedule, Rng& rng) {
  return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps())));
}

void check_options(const NllOptions& options) {
  require(options.noise_draws >= 1, "noise_draws must be at least 1");
  require(options.mode == TimestepMode::all || options.timestep_samples >= 1, "timestep_samples must be at least 1");
}

// Timesteps visited for one query, in evaluation order.
std::vector<int> query_timesteps(const VarianceSchedule& schedule, const NllOptions& options, Rng& rng) {
  std::vector<int> ts;
  if (options.mode == TimestepMode::all) {
    for (int t = 1; t <= schedule.steps(); ++t) ts.push_back(t);
  } else {
    for (int i = 0; i < options.timestep_samples; ++i) ts.push_back(draw_timestep(schedule, rng));
  }
  return ts;
}

}  // namespace

std::vector<double> time_embedding(int t, std::size_t dim) {
  require(dim > 0 && dim % 2 == 0, "time embedding dimension must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double w = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    out[2 * i] = std::sin(t * w);
    out[2 * i + 1] = std::cos(t * w);
  }
  return out;
}

Array EpsilonPredictor::predict(const Array& noisy, const Array& states, std::span<const int> timesteps) const {
  Tape tape;
  grad::ParamBinding binding;
  Var out = record(tape, tape.constant(noisy), states, timesteps, binding);
  return tape.value(out);
}

NoisePredictor::NoisePredictor(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden,
                               std::size_t embed_dim, Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim), embed_dim_(embed_dim) {
  require(state_dim > 0 && action_dim > 0, "noise predictor needs positive state and action dimensions");
  require(embed_dim > 0 && embed_dim % 2 == 0, "time embedding dimension must be even and positive");
  std::vector<std::size_t> sizes{action_dim + state_dim + embed_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  net_ = grad::Mlp(std::move(sizes), grad::Activation::linear, rng);
}

NoisePredictor::NoisePredictor(grad::Mlp net, std::size_t state_dim, std::size_t action_dim, std::size_t embed_dim)
    : net_(std::move(net)), state_dim_(state_dim), action_dim_(action_dim), embed_dim_(embed_dim) {
  if (net_.input_dim() != action_dim + state_dim + embed_dim || net_.output_dim() != action_dim) {
    throw DimensionError("noise predictor network does not match (state, action, embed) dimensions");
  }
}

Array NoisePredictor::conditioning(const Array& states, std::span<const int> timesteps) const {
  if (states.cols() != state_dim_) {
    throw DimensionError("noise predictor: state width " + std::to_string(states.cols()) + " != " +
                         std::to_string(state_dim_));
  }
  const std::size_t rows = timesteps.size();
  if (states.rows() != rows) throw DimensionError("noise predictor: state rows != timestep count");
  Array cond({rows, state_dim_ + embed_dim_});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < state_dim_; ++c) cond(r, c) = states(r, c);
    const auto emb = time_embedding(timesteps[r], embed_dim_);
    for (std::size_t c = 0; c < embed_dim_; ++c) cond(r, state_dim_ + c) = emb[c];
  }
  return cond;
}

Var NoisePredictor::record(Tape& tape, Var noisy, const Array& states, std::span<const int> timesteps,
                           grad::ParamBinding& binding) const {
  const Array& x = tape.value(noisy);
  if (x.cols() != action_dim_ || x.rows() != timesteps.size()) {
    throw DimensionError("noise predictor: noisy actions " + grad::shape_string(x.shape()) + " do not match batch");
  }
  const Var parts[] = {noisy, tape.constant(conditioning(states, timesteps))};
  return net_.record(tape, tape.concat(parts), binding);
}

Array NoisePredictor::predict(const Array& noisy, const Array& states, std::span<const int> timesteps) const {
  if (noisy.cols() != action_dim_ || noisy.rows() != timesteps.size()) {
    throw DimensionError("noise predictor: noisy actions " + grad::shape_string(noisy.shape()) + " do not match batch");
  }
  const Array cond = conditioning(states, timesteps);
  const std::size_t rows = noisy.rows();
  Array input({rows, net_.input_dim()});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < action_dim_; ++c) input(r, c) = noisy(r, c);
    for (std::size_t c = 0; c < cond.cols(); ++c) input(r, action_dim_ + c) = cond(r, c);
  }
  return net_.forward(input);
}

const char* timestep_mode_name(TimestepMode m) { return m == TimestepMode::all ? "all" : "sampled"; }

TimestepMode parse_timestep_mode(const std::string& name) {
  if (name == "all") return TimestepMode::all;
  if (name == "sampled") return TimestepMode::sampled;
  throw ContractError("unknown timestep mode '" + name + "'");
}

namespace {

struct NoisedBatch {
  Array noisy;
  Array eps;
  std::vector<int> timesteps;
};

NoisedBatch noise_batch(const VarianceSchedule& schedule, const Array& actions, Rng& rng) {
  NoisedBatch b{Array(actions.shape()), Array(actions.shape()), std::vector<int>(actions.rows())};
  const std::size_t d = actions.cols();
  for (std::size_t r = 0; r < actions.rows(); ++r) {
    const int t = draw_timestep(schedule, rng);
    b.timesteps[r] = t;
    const double signal = std::sqrt(schedule.alpha_bar(t));
    const double noise = std::sqrt(1.0 - schedule.alpha_bar(t));
    for (std::size_t c = 0; c < d; ++c) {
      const double e = rng.normal();
      b.eps(r, c) = e;
      b.noisy(r, c) = signal * actions(r, c) + noise * e;
    }
  }
  return b;
}

}  // namespace

double diffusion_loss(const EpsilonPredictor& predictor, const VarianceSchedule& schedule, const Array& states,
                      const Array& actions, Rng& rng) {
  check_batch(predictor, states, actions, "diffusion_loss");
  const NoisedBatch b = noise_batch(schedule, actions, rng);
  const Array pred = predictor.predict(b.noisy, states, b.timesteps);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = b.eps[i] - pred[i];
    total += diff * diff;
  }
  return total / static_cast<double>(actions.rows());
}

double diffusion_train_step(NoisePredictor& predictor, grad::AdamState& adam, const VarianceSchedule& schedule,
                            const Array& states, const Array& actions, Rng& rng) {
  check_batch(predictor, states, actions, "diffusion_train_step");
  const NoisedBatch b = noise_batch(schedule, actions, rng);
  Tape tape;
  grad::ParamBinding binding{true, {}};
  Var pred = predictor.record(tape, tape.constant(b.noisy), states, b.timesteps, binding);
  Var err = tape.sub(tape.constant(b.eps), pred);
  // mean over all B*d entries times d == mean over rows of the squared norm
  Var loss = tape.scale(tape.mean(tape.square(err)), static_cast<double>(predictor.action_dim()));
  tape.backward(loss);
  const auto grads = binding.gradients(tape);
  grad::adam_step(predictor.net().parameters(), grads, adam);
  return tape.value(loss).item();
}

std::vector<double> estimate_nll_batch(const EpsilonPredictor& predictor, const VarianceSchedule& schedule,
                                       const Array& states, const Array& actions, const NllOptions& options,
                                       Rng& rng) {
  check_batch(predictor, states, actions, "estimate_nll");
  check_options(options);
  const std::size_t n = actions.rows();
  const std::size_t d = actions.cols();
  const std::size_t sd = states.cols();
  const std::size_t k = static_cast<std::size_t>(options.noise_draws);
  std::vector<double> out(n, 0.0);

  // Rows are generated query by query and flushed through the predictor in chunks.
  Array noisy({kPredictChunk, d});
  Array eps({kPredictChunk, d});
  Array cond_states({kPredictChunk, sd});
  std::vector<int> ts;
  std::vector<std::size_t> owner;
  ts.reserve(kPredictChunk);
  owner.reserve(kPredictChunk);

  auto flush = [&]() {
    if (ts.empty()) return;
    const std::size_t rows = ts.size();
    Array x({rows, d});
    Array s({rows, sd});
    std::copy_n(noisy.data(), rows * d, x.data());
    std::copy_n(cond_states.data(), rows * s.cols(), s.data());
    const Array pred = predictor.predict(x, s, ts);
    for (std::size_t r = 0; r < rows; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = eps(r, c) - pred(r, c);
        sq += diff * diff;
      }
      out[owner[r]] += sq;
    }
    ts.clear();
    owner.clear();
  };

  std::vector<std::size_t> replicas(n, 0);
  for (std::size_t q = 0; q < n; ++q) {
    const std::vector<int> steps = query_timesteps(schedule, options, rng);
    replicas[q] = steps.size() * k;
    for (int t : steps) {
      const double signal = std::sqrt(schedule.alpha_bar(t));
      const double noise = std::sqrt(1.0 - schedule.alpha_bar(t));
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t r = ts.size();
        for (std::size_t c = 0; c < d; ++c) {
          const double e = rng.normal();
          eps(r, c) = e;
          noisy(r, c) = signal * actions(q, c) + noise * e;
        }
        for (std::size_t c = 0; c < sd; ++c) cond_states(r, c) = states(q, c);
        ts.push_back(t);
        owner.push_back(q);
        if (ts.size() == kPredictChunk) flush();
      }
    }
  }
  flush();
  for (std::size_t q = 0; q < n; ++q) out[q] /= static_cast<double>(replicas[q]);
  return out;
}

double estimate_nll(const EpsilonPredictor& predictor, const VarianceSchedule& schedule, const DensityQuery& query,
                    Rng& rng) {
  const Array states = Array::row(query.state);
  const Array actions = Array::row(query.action);
  return estimate_nll_batch(predictor, schedule, states, actions, query.options, rng).front();
}

Var record_nll(Tape& tape, const EpsilonPredictor& predictor, const VarianceSchedule& schedule, Var actions,
               const Array& states, const NllOptions& options, Rng& rng) {
  const Array& a = tape.value(actions);
  check_batch(predictor, states, a, "record_nll");
  check_options(options);
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  const std::size_t k = static_cast<std::size_t>(options.noise_draws);
  const std::size_t steps =
      options.mode == TimestepMode::all ? static_cast<std::size_t>(schedule.steps())
                                        : static_cast<std::size_t>(options.timestep_samples);

  // Per query draw the timestep list first, then noise replica by replica;
  // replica r of every query is evaluated as one batch on the tape.
  std::vector<std::vector<int>> per_query(n);
  for (std::size_t q = 0; q < n; ++q) per_query[q] = query_timesteps(schedule, options, rng);

  grad::ParamBinding binding;
  const Var ones = tape.constant(Array({d, 1}, 1.0));
  Var total{};
  bool first = true;
  std::vector<int> ts(n);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      Array signal({n, d});
      Array shift({n, d});
      Array eps({n, d});
      for (std::size_t q = 0; q < n; ++q) {
        const int t = per_query[q][i];
        ts[q] = t;
        const double sa = std::sqrt(schedule.alpha_bar(t));
        const double sn = std::sqrt(1.0 - schedule.alpha_bar(t));
        for (std::size_t c = 0; c < d; ++c) {
          const double e = rng.normal();
          eps(q, c) = e;
          signal(q, c) = sa;
          shift(q, c) = sn * e;
        }
      }
      Var noisy = tape.add(tape.mul(actions, tape.constant(std::move(signal))), tape.constant(std::move(shift)));
      Var pred = predictor.record(tape, noisy, states, ts, binding);
      Var sq = tape.matmul(tape.square(tape.sub(tape.constant(std::move(eps)), pred)), ones);
      total = first ? sq : tape.add(total, sq);
      first = false;
    }
  }
  return tape.scale(total, 1.0 / static_cast<double>(steps * k));
}

Array reverse_sample(const EpsilonPredictor& predictor, const VarianceSchedule& schedule, const Array& states,
                     Rng& rng) {
  const std::size_t n = states.rows();
  const std::size_t d = predictor.action_dim();
  if (states.cols() != predictor.state_dim()) {
    throw DimensionError("reverse_sample: state width does not match predictor");
  }
  Array x({n, d});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  std::vector<int> ts(n);
  for (int t = schedule.steps(); t >= 1; --t) {
    std::fill(ts.begin(), ts.end(), t);
    const Array eps = predictor.predict(x, states, ts);
    const double coef = (1.0 - schedule.alpha(t)) / std::sqrt(1.0 - schedule.alpha_bar(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
    const double sigma = std::sqrt(schedule.posterior_variance(t));
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = inv_sqrt_alpha * (x[i] - coef * eps[i]);
      if (t > 1) x[i] += sigma * rng.normal();
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], -1.0, 1.0);
  return x;
}

Var DiffusionDensity::record_nll(Tape& tape, Var actions, const Array& states, Rng& rng) const {
  return diffusion::record_nll(tape, *predictor_, *schedule_, actions, states, options_, rng);
}

std::vector<double> DiffusionDensity::nll(const Array& states, const Array& actions, Rng& rng) const {
  return estimate_nll_batch(*predictor_, *schedule_, states, actions, options_, rng);
}

void save_predictor(const std::filesystem::path& path, const NoisePredictor& predictor,
                    const VarianceSchedule& schedule) {
  const nlohmann::json extra = {{"kind", "noise-predictor"},
                                {"state_dim", predictor.state_dim()},
                                {"action_dim", predictor.action_dim()},
                                {"embed_dim", predictor.embed_dim()},
                                {"schedule", schedule.to_json()}};
  grad::save_checkpoint(path, predictor.net(), extra);
}

NoisePredictor load_predictor(const std::filesystem::path& path, VarianceSchedule* schedule) {
  nlohmann::json extra;
  grad::Mlp net = grad::load_checkpoint(path, &extra);
  try {
    if (extra.value("kind", "") != "noise-predictor") throw FormatError(path.string() + ": not a noise predictor");
    if (schedule) *schedule = VarianceSchedule::from_json(extra.at("schedule"));
    return NoisePredictor(std::move(net), extra.at("state_dim").get<std::size_t>(),
                          extra.at("action_dim").get<std::size_t>(), extra.at("embed_dim").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad predictor header: " + e.what());
  }
}

}  // namespace osc::diffusion
