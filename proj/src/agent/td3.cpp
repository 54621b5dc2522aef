#include "osc/agent/td3.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osc/errors.hpp"
#include "osc/grad/checkpoint.hpp"
#include "osc/grad/tape.hpp"
#include "osc/io.hpp"
#include "osc/stats.hpp"

namespace osc::agent {

using grad::Array;
using grad::Tape;
using grad::Var;

namespace {

Array concat_cols(const Array& a, const Array& b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
  Array out({a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.data() + r * a.cols(), a.cols(), out.data() + r * out.cols());
    std::copy_n(b.data() + r * b.cols(), b.cols(), out.data() + r * out.cols() + a.cols());
  }
  return out;
}

void check_batch(const AgentParams& agent, const data::Batch& batch) {
  if (batch.states.cols() != agent.state_dim || batch.actions.cols() != agent.action_dim ||
      batch.next_states.cols() != agent.state_dim) {
    throw DimensionError("batch widths do not match the agent");
  }
}

grad::Mlp make_critic(std::size_t sd, std::size_t ad, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> sizes{sd + ad};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return grad::Mlp(std::move(sizes), grad::Activation::linear, rng);
}

void blend(std::span<grad::Array> target, std::span<const grad::Array> online, double tau) {
  for (std::size_t i = 0; i < target.size(); ++i) {
    for (std::size_t k = 0; k < target[i].size(); ++k) target[i][k] = tau * online[i][k] + (1.0 - tau) * target[i][k];
  }
}

}  // namespace

const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::none: return "none";
    case Constraint::osc: return "osc";
    case Constraint::spot: return "spot";
  }
  return "?";
}

Constraint parse_constraint(const std::string& name) {
  if (name == "none") return Constraint::none;
  if (name == "osc") return Constraint::osc;
  if (name == "spot") return Constraint::spot;
  throw ContractError("unknown constraint '" + name + "'");
}

void TD3Config::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  require(policy_delay >= 1, "policy_delay must be at least 1");
  require(target_noise >= 0.0 && target_noise_clip >= 0.0, "target noise settings must be >= 0");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(!hidden.empty(), "networks need at least one hidden layer");
  require(actor_lr > 0.0 && critic_lr > 0.0, "learning rates must be positive");
  penalty.validate();
}

void to_json(nlohmann::json& j, const TD3Config& c) {
  j = {{"gamma", c.gamma},
       {"tau", c.tau},
       {"policy_delay", c.policy_delay},
       {"target_noise", c.target_noise},
       {"target_noise_clip", c.target_noise_clip},
       {"batch_size", c.batch_size},
       {"hidden", c.hidden},
       {"actor_lr", c.actor_lr},
       {"critic_lr", c.critic_lr},
       {"constraint", constraint_name(c.constraint)},
       {"penalty", c.penalty},
       {"normalize_q", c.normalize_q}};
}

void from_json(const nlohmann::json& j, TD3Config& c) {
  const TD3Config d;
  c.gamma = j.value("gamma", d.gamma);
  c.tau = j.value("tau", d.tau);
  c.policy_delay = j.value("policy_delay", d.policy_delay);
  c.target_noise = j.value("target_noise", d.target_noise);
  c.target_noise_clip = j.value("target_noise_clip", d.target_noise_clip);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.hidden = j.value("hidden", d.hidden);
  c.actor_lr = j.value("actor_lr", d.actor_lr);
  c.critic_lr = j.value("critic_lr", d.critic_lr);
  c.constraint = parse_constraint(j.value("constraint", std::string(constraint_name(d.constraint))));
  c.penalty = j.value("penalty", d.penalty);
  c.normalize_q = j.value("normalize_q", d.normalize_q);
  c.validate();
}

AgentParams make_agent(std::size_t state_dim, std::size_t action_dim, const TD3Config& cfg, Rng& rng) {
  cfg.validate();
  require(state_dim > 0 && action_dim > 0, "agent needs positive state and action dimensions");
  std::vector<std::size_t> actor_sizes{state_dim};
  actor_sizes.insert(actor_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  actor_sizes.push_back(action_dim);
  grad::Mlp actor(std::move(actor_sizes), grad::Activation::tanh, rng);
  grad::Mlp c1 = make_critic(state_dim, action_dim, cfg.hidden, rng);
  grad::Mlp c2 = make_critic(state_dim, action_dim, cfg.hidden, rng);
  AgentParams a{state_dim,
                action_dim,
                actor,
                c1,
                c2,
                actor,
                c1,
                c2,
                grad::AdamState(actor.parameters(), {cfg.actor_lr}),
                grad::AdamState(c1.parameters(), {cfg.critic_lr}),
                grad::AdamState(c2.parameters(), {cfg.critic_lr})};
  return a;
}

Array critic_targets(const AgentParams& agent, const data::Batch& batch, const TD3Config& cfg, Rng& rng) {
  check_batch(agent, batch);
  Array next_actions = agent.actor_target.forward(batch.next_states);
  for (std::size_t i = 0; i < next_actions.size(); ++i) {
    const double noise = std::clamp(cfg.target_noise * rng.normal(), -cfg.target_noise_clip, cfg.target_noise_clip);
    next_actions[i] = std::clamp(next_actions[i] + noise, -1.0, 1.0);
  }
  const Array input = concat_cols(batch.next_states, next_actions);
  const Array q1 = agent.critic1_target.forward(input);
  const Array q2 = agent.critic2_target.forward(input);
  Array y({batch.rewards.rows(), 1});
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = batch.rewards[i] + cfg.gamma * (1.0 - batch.dones[i]) * std::min(q1[i], q2[i]);
    if (!std::isfinite(y[i])) throw NumericError("critic target is not finite");
  }
  return y;
}

double critic_update(AgentParams& agent, const data::Batch& batch, const TD3Config& cfg, Rng& rng) {
  const Array y = critic_targets(agent, batch, cfg, rng);
  Tape tape;
  const Var input = tape.constant(concat_cols(batch.states, batch.actions));
  grad::ParamBinding b1{true, {}}, b2{true, {}};
  const Var q1 = agent.critic1.record(tape, input, b1);
  const Var q2 = agent.critic2.record(tape, input, b2);
  const Var target = tape.constant(y);
  const Var l1 = tape.mean(tape.square(tape.sub(q1, target)));
  const Var l2 = tape.mean(tape.square(tape.sub(q2, target)));
  const Var loss = tape.add(l1, l2);
  tape.backward(loss);
  const auto g1 = b1.gradients(tape);
  const auto g2 = b2.gradients(tape);
  // stage both steps so a failure in the second leaves the first untouched too
  grad::Mlp c1 = agent.critic1, c2 = agent.critic2;
  grad::AdamState o1 = agent.critic1_opt, o2 = agent.critic2_opt;
  grad::adam_step(c1.parameters(), g1, o1);
  grad::adam_step(c2.parameters(), g2, o2);
  agent.critic1 = std::move(c1);
  agent.critic2 = std::move(c2);
  agent.critic1_opt = std::move(o1);
  agent.critic2_opt = std::move(o2);
  return 0.5 * tape.value(loss).item();
}

ActorStats actor_update(AgentParams& agent, const BehaviorDensity* density, const Array& states, const TD3Config& cfg,
                        Rng& rng) {
  if (states.cols() != agent.state_dim) throw DimensionError("actor_update: state width does not match the agent");
  Tape tape;
  const Var s = tape.constant(states);
  grad::ParamBinding actor_binding{true, {}};
  const Var a = agent.actor.record(tape, s, actor_binding);
  const Var parts[] = {s, a};
  grad::ParamBinding critic_binding{false, {}};
  const Var q = agent.critic1.record(tape, tape.concat(parts), critic_binding);
  Var objective = tape.mean(q);

  ActorStats stats;
  stats.mean_f = std::numeric_limits<double>::quiet_NaN();
  stats.activation_rate = std::numeric_limits<double>::quiet_NaN();
  if (cfg.penalty_active()) {
    require(density != nullptr, "an active penalty needs a behavior density");
    if (cfg.normalize_q) {
      double scale = 0.0;
      for (double v : tape.value(q).values()) scale += std::abs(v);
      scale /= static_cast<double>(states.rows());
      objective = tape.scale(objective, 1.0 / std::max(scale, 1e-8));
    }
    const Var f = density->record_nll(tape, a, states, rng);
    const Var bonus = cfg.constraint == Constraint::osc ? record_osc_penalty(tape, f, cfg.penalty)
                                                        : record_spot_penalty(tape, f, cfg.penalty.lambda);
    objective = tape.add(objective, tape.mean(bonus));
    double sum = 0.0, active = 0.0;
    for (double v : tape.value(f).values()) {
      sum += v;
      active += v > cfg.penalty.eps_breve ? 1.0 : 0.0;
    }
    stats.mean_f = sum / static_cast<double>(states.rows());
    stats.activation_rate = active / static_cast<double>(states.rows());
  }
  const Var loss = tape.scale(objective, -1.0);
  tape.backward(loss);
  grad::adam_step(agent.actor.parameters(), actor_binding.gradients(tape), agent.actor_opt);
  stats.objective = tape.value(objective).item();
  return stats;
}

void soft_update(AgentParams& agent, double tau) {
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  blend(agent.actor_target.parameters(), agent.actor.parameters(), tau);
  blend(agent.critic1_target.parameters(), agent.critic1.parameters(), tau);
  blend(agent.critic2_target.parameters(), agent.critic2.parameters(), tau);
}

std::vector<double> act(const AgentParams& agent, std::span<const double> state, double sigma, Rng& rng) {
  if (state.size() != agent.state_dim) throw DimensionError("act: state width does not match the agent");
  const Array out = agent.actor.forward(Array::row(std::vector<double>(state.begin(), state.end())));
  std::vector<double> a(out.values().begin(), out.values().end());
  if (sigma > 0.0) {
    for (double& v : a) v = std::clamp(v + sigma * rng.normal(), -1.0, 1.0);
  }
  return a;
}

Array act_batch(const AgentParams& agent, const Array& states) { return agent.actor.forward(states); }

void LambdaSchedule::validate() const {
  require(final <= initial, "lambda schedule must not increase");
  require(final >= 0.0, "lambda schedule must stay >= 0");
  require(decay_steps >= 1, "lambda schedule needs decay_steps >= 1");
  require(mode == DecayMode::linear || final > 0.0, "exponential lambda decay needs final > 0");
}

void to_json(nlohmann::json& j, const LambdaSchedule& s) {
  j = {{"initial", s.initial},
       {"final", s.final},
       {"decay_steps", s.decay_steps},
       {"mode", s.mode == DecayMode::linear ? "linear" : "exponential"}};
}

void from_json(const nlohmann::json& j, LambdaSchedule& s) {
  const LambdaSchedule d;
  s.initial = j.value("initial", d.initial);
  s.final = j.value("final", d.final);
  s.decay_steps = j.value("decay_steps", d.decay_steps);
  const std::string mode = j.value("mode", std::string("linear"));
  if (mode != "linear" && mode != "exponential") throw ContractError("unknown lambda decay mode '" + mode + "'");
  s.mode = mode == "linear" ? DecayMode::linear : DecayMode::exponential;
  s.validate();
}

double finetune_lambda(const LambdaSchedule& s, int step) {
  require(step >= 0, "finetune_lambda needs step >= 0");
  if (step >= s.decay_steps) return s.final;
  const double frac = static_cast<double>(step) / s.decay_steps;
  if (s.mode == DecayMode::linear) return s.initial + (s.final - s.initial) * frac;
  return s.initial * std::pow(s.final / s.initial, frac);
}

void train_offline(AgentParams& agent, const data::Dataset& dataset, const BehaviorDensity* density,
                   const TD3Config& cfg, int steps, TrainerStreams& streams, const MetricsSink& sink) {
  cfg.validate();
  require(!dataset.empty(), "train_offline needs a nonempty dataset");
  StepMetrics m;
  m.lambda = cfg.penalty.lambda;
  m.mean_f = m.activation_rate = std::numeric_limits<double>::quiet_NaN();
  for (int step = 1; step <= steps; ++step) {
    const data::Batch batch = data::sample_batch(dataset, cfg.batch_size, streams.batch);
    m.step = step;
    m.td_loss = critic_update(agent, batch, cfg, streams.target_noise);
    if (step % cfg.policy_delay == 0) {
      const ActorStats a = actor_update(agent, density, batch.states, cfg, streams.density);
      soft_update(agent, cfg.tau);
      m.actor_objective = a.objective;
      m.mean_f = a.mean_f;
      m.activation_rate = a.activation_rate;
    }
    if (sink) sink(m);
  }
}

void to_json(nlohmann::json& j, const FinetuneOptions& o) {
  j = {{"schedule", o.schedule},
       {"online_steps", o.online_steps},
       {"offline_fraction", o.offline_fraction},
       {"exploration_sigma", o.exploration_sigma}};
}

void from_json(const nlohmann::json& j, FinetuneOptions& o) {
  const FinetuneOptions d;
  o.schedule = j.value("schedule", d.schedule);
  o.online_steps = j.value("online_steps", d.online_steps);
  o.offline_fraction = j.value("offline_fraction", d.offline_fraction);
  o.exploration_sigma = j.value("exploration_sigma", d.exploration_sigma);
  require(o.online_steps >= 0, "online_steps must be >= 0");
  require(o.offline_fraction >= 0.0 && o.offline_fraction <= 1.0, "offline_fraction must lie in [0, 1]");
  require(o.exploration_sigma >= 0.0, "exploration_sigma must be >= 0");
}

namespace {

data::Batch mixed_batch(const data::Dataset& offline, const data::Dataset& online, std::size_t size,
                        double offline_fraction, Rng& rng) {
  std::size_t n_off = static_cast<std::size_t>(std::lround(offline_fraction * static_cast<double>(size)));
  if (online.empty()) n_off = size;
  if (offline.empty()) n_off = 0;
  const std::size_t n_on = size - n_off;
  data::Dataset merged;
  merged.state_dim = offline.state_dim;
  merged.action_dim = offline.action_dim;
  for (std::size_t i = 0; i < n_off; ++i) {
    const std::size_t r = rng.below(offline.size());
    merged.push(offline.state(r), offline.action(r), offline.rewards[r], offline.next_state(r), offline.dones[r]);
  }
  for (std::size_t i = 0; i < n_on; ++i) {
    const std::size_t r = rng.below(online.size());
    merged.push(online.state(r), online.action(r), online.rewards[r], online.next_state(r), online.dones[r]);
  }
  std::vector<std::size_t> rows(size);
  for (std::size_t i = 0; i < size; ++i) rows[i] = i;
  return data::gather(merged, rows);
}

}  // namespace

void finetune_online(AgentParams& agent, envs::Environment& env, const data::Dataset& offline,
                     const data::ActionScaler& scaler, const BehaviorDensity* density, TD3Config cfg,
                     const FinetuneOptions& options, TrainerStreams& streams, const MetricsSink& sink) {
  options.schedule.validate();
  require(env.state_dim() == agent.state_dim && env.action_dim() == agent.action_dim,
          "fine-tuning environment does not match the agent");
  data::Dataset online;
  online.state_dim = agent.state_dim;
  online.action_dim = agent.action_dim;
  online.env = env.spec();
  std::vector<double> state = env.reset(streams.explore);
  int t = 0;
  StepMetrics m;
  m.mean_f = m.activation_rate = std::numeric_limits<double>::quiet_NaN();
  for (int step = 0; step < options.online_steps; ++step) {
    cfg.penalty.lambda = finetune_lambda(options.schedule, step);
    const std::vector<double> a = act(agent, state, options.exploration_sigma, streams.explore);
    envs::StepResult r = env.step(scaler.denormalize(a));
    online.push(state, a, r.reward, r.state, r.done);
    if (r.done || ++t >= env.horizon()) {
      state = env.reset(streams.explore);
      t = 0;
    } else {
      state = std::move(r.state);
    }
    const data::Batch batch = mixed_batch(offline, online, cfg.batch_size, options.offline_fraction, streams.batch);
    m.step = step + 1;
    m.lambda = cfg.penalty.lambda;
    m.td_loss = critic_update(agent, batch, cfg, streams.target_noise);
    if ((step + 1) % cfg.policy_delay == 0) {
      const ActorStats s = actor_update(agent, density, batch.states, cfg, streams.density);
      soft_update(agent, cfg.tau);
      m.actor_objective = s.objective;
      m.mean_f = s.mean_f;
      m.activation_rate = s.activation_rate;
    }
    if (sink) sink(m);
  }
}

double select_eps_breve(const BehaviorDensity& density, const Array& states, const Array& actions, double q,
                        Rng& rng) {
  return stats::quantile(density.nll(states, actions, rng), q);
}

namespace {

constexpr int kAgentVersion = 1;
constexpr const char* kNets[] = {"actor", "critic1", "critic2", "actor_target", "critic1_target", "critic2_target"};

}  // namespace

void save_agent(const std::filesystem::path& dir, const AgentParams& agent, const TD3Config& cfg) {
  std::filesystem::create_directories(dir);
  const nlohmann::json meta = {{"format", "osc-agent"},
                               {"format_version", kAgentVersion},
                               {"state_dim", agent.state_dim},
                               {"action_dim", agent.action_dim},
                               {"config", cfg}};
  io::write_text(dir / "agent.json", meta.dump(2) + "\n");
  const grad::Mlp* nets[] = {&agent.actor,        &agent.critic1,        &agent.critic2,
                             &agent.actor_target, &agent.critic1_target, &agent.critic2_target};
  for (std::size_t i = 0; i < std::size(kNets); ++i) grad::save_checkpoint(dir / (std::string(kNets[i]) + ".ckpt"), *nets[i]);
}

AgentParams load_agent(const std::filesystem::path& dir, TD3Config* cfg_out) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_text(dir / "agent.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "agent.json").string() + ": " + e.what());
  }
  try {
    if (meta.value("format", "") != "osc-agent" || meta.value("format_version", -1) != kAgentVersion) {
      throw FormatError((dir / "agent.json").string() + ": not a supported agent directory");
    }
    const TD3Config cfg = meta.at("config").get<TD3Config>();
    AgentParams a;
    a.state_dim = meta.at("state_dim").get<std::size_t>();
    a.action_dim = meta.at("action_dim").get<std::size_t>();
    grad::Mlp* nets[] = {&a.actor, &a.critic1, &a.critic2, &a.actor_target, &a.critic1_target, &a.critic2_target};
    for (std::size_t i = 0; i < std::size(kNets); ++i) *nets[i] = grad::load_checkpoint(dir / (std::string(kNets[i]) + ".ckpt"));
    if (a.actor.input_dim() != a.state_dim || a.actor.output_dim() != a.action_dim ||
        a.critic1.input_dim() != a.state_dim + a.action_dim || a.critic2.input_dim() != a.critic1.input_dim() ||
        !(a.actor_target.layer_sizes() == a.actor.layer_sizes()) ||
        !(a.critic1_target.layer_sizes() == a.critic1.layer_sizes()) ||
        !(a.critic2_target.layer_sizes() == a.critic2.layer_sizes())) {
      throw FormatError(dir.string() + ": network shapes disagree with agent.json");
    }
    a.actor_opt = grad::AdamState(a.actor.parameters(), {cfg.actor_lr});
    a.critic1_opt = grad::AdamState(a.critic1.parameters(), {cfg.critic_lr});
    a.critic2_opt = grad::AdamState(a.critic2.parameters(), {cfg.critic_lr});
    if (cfg_out) *cfg_out = cfg;
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
}

}  // namespace osc::agent
