#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "osc/data/dataset.hpp"
#include "osc/density.hpp"
#include "osc/envs/env.hpp"
#include "osc/grad/adam.hpp"
#include "osc/grad/mlp.hpp"
#include "osc/penalty.hpp"
#include "osc/rng.hpp"

namespace osc::agent {

/// What the actor adds to Q: nothing, the OSC sigmoid bonus, or the linear
/// -lambda*F term.
enum class Constraint { none, osc, spot };

const char* constraint_name(Constraint c);
Constraint parse_constraint(const std::string& name);

struct TD3Config {
  double gamma = 0.99;
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  std::size_t batch_size = 256;
  std::vector<std::size_t> hidden{64, 64};
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  Constraint constraint = Constraint::osc;
  PenaltyConfig penalty;
  /// Divide the Q term by mean|Q| of the batch (a detached constant) while a
  /// penalty is active, so lambda is measured against a unit-scale Q. Off by
  /// default: with a unit-scale Q the bonus slope near the support edge
  /// outweighs the Q slope and larger lambda drags the actor to the dense mode.
  bool normalize_q = false;

  /// ContractError on 0 < gamma < 1, 0 < tau <= 1, policy_delay >= 1 violations.
  void validate() const;
  bool penalty_active() const { return constraint != Constraint::none && penalty.lambda > 0.0; }
};

void to_json(nlohmann::json& j, const TD3Config& cfg);
void from_json(const nlohmann::json& j, TD3Config& cfg);

/// Online and target networks with one Adam state per online network. The
/// actor is tanh-squashed, so actions live in [-1, 1]^d.
struct AgentParams {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  grad::Mlp actor, critic1, critic2;
  grad::Mlp actor_target, critic1_target, critic2_target;
  grad::AdamState actor_opt, critic1_opt, critic2_opt;
};

AgentParams make_agent(std::size_t state_dim, std::size_t action_dim, const TD3Config& cfg, Rng& rng);

/// Bootstrapped targets r + gamma * (1 - done) * min(Q1', Q2')(s', a') with
/// a' = clip(actor'(s') + clip(sigma * N(0, I), -c, c), -1, 1).
grad::Array critic_targets(const AgentParams& agent, const data::Batch& batch, const TD3Config& cfg, Rng& rng);

/// One Adam step on both critics towards the targets; returns the mean of the
/// two critics' mean squared TD errors before the step. NumericError (no
/// step) on non-finite targets or loss.
double critic_update(AgentParams& agent, const data::Batch& batch, const TD3Config& cfg, Rng& rng);

struct ActorStats {
  double objective = 0.0;
  /// Mean F of the actor's actions and the fraction with F > eps_breve; NaN
  /// when no penalty was evaluated.
  double mean_f = 0.0;
  double activation_rate = 0.0;
};

/// One Adam step on the actor ascending mean(Q1(s, pi(s))) + mean(bonus(F(pi(s)|s))).
/// `density` may be null when no penalty is active.
ActorStats actor_update(AgentParams& agent, const BehaviorDensity* density, const grad::Array& states,
                        const TD3Config& cfg, Rng& rng);

/// target <- tau * online + (1 - tau) * target for actor and both critics.
void soft_update(AgentParams& agent, double tau);

/// Actor output plus N(0, sigma^2) exploration noise, clipped to [-1, 1].
std::vector<double> act(const AgentParams& agent, std::span<const double> state, double sigma, Rng& rng);
grad::Array act_batch(const AgentParams& agent, const grad::Array& states);

enum class DecayMode { linear, exponential };

struct LambdaSchedule {
  double initial = 1.0;
  double final = 0.0;
  int decay_steps = 1000;
  DecayMode mode = DecayMode::linear;

  /// ContractError unless final <= initial, decay_steps >= 1 (and final > 0 for exponential).
  void validate() const;
};

void to_json(nlohmann::json& j, const LambdaSchedule& s);
void from_json(const nlohmann::json& j, LambdaSchedule& s);

double finetune_lambda(const LambdaSchedule& schedule, int step);

struct StepMetrics {
  int step = 0;
  double td_loss = 0.0;
  double actor_objective = 0.0;
  double mean_f = 0.0;
  double activation_rate = 0.0;
  double lambda = 0.0;
};

/// Owns the per-purpose random streams of a training run so that skipping the
/// density (lambda = 0) leaves batch sampling and target noise untouched.
struct TrainerStreams {
  explicit TrainerStreams(const Rng& root)
      : batch(root.substream("batch")), target_noise(root.substream("target-noise")),
        density(root.substream("density")), explore(root.substream("explore")) {}
  Rng batch;
  Rng target_noise;
  Rng density;
  Rng explore;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

/// Offline TD3 on a dataset whose actions are already normalized to [-1, 1].
/// Step i updates the critics, then (every policy_delay steps) the actor and
/// the targets.
void train_offline(AgentParams& agent, const data::Dataset& dataset, const BehaviorDensity* density,
                   const TD3Config& cfg, int steps, TrainerStreams& streams, const MetricsSink& sink = {});

struct FinetuneOptions {
  LambdaSchedule schedule;
  int online_steps = 5000;
  /// Fraction of each batch drawn from the offline data.
  double offline_fraction = 0.5;
  double exploration_sigma = 0.1;
};

void to_json(nlohmann::json& j, const FinetuneOptions& o);
void from_json(const nlohmann::json& j, FinetuneOptions& o);

/// Online fine-tuning: act in `env` with exploration noise, store transitions
/// (actions normalized by `scaler`), and train on batches mixing offline and
/// online data while lambda follows the schedule.
void finetune_online(AgentParams& agent, envs::Environment& env, const data::Dataset& offline,
                     const data::ActionScaler& scaler, const BehaviorDensity* density, TD3Config cfg,
                     const FinetuneOptions& options, TrainerStreams& streams, const MetricsSink& sink = {});

/// eps_breve as the q-quantile of F over (states, actions).
double select_eps_breve(const BehaviorDensity& density, const grad::Array& states, const grad::Array& actions,
                        double q, Rng& rng);

/// Directory with agent.json (config + dims) and six network checkpoints.
void save_agent(const std::filesystem::path& dir, const AgentParams& agent, const TD3Config& cfg);
/// Adam states start fresh. FormatError on missing or inconsistent files.
AgentParams load_agent(const std::filesystem::path& dir, TD3Config* cfg = nullptr);

}  // namespace osc::agent
