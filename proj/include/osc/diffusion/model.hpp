#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "osc/density.hpp"
#include "osc/diffusion/schedule.hpp"
#include "osc/grad/adam.hpp"
#include "osc/grad/mlp.hpp"
#include "osc/grad/tape.hpp"
#include "osc/rng.hpp"

namespace osc::diffusion {

/// Sinusoidal features of the timestep: [sin(t w_0), cos(t w_0), ...] with
/// w_i = 10000^(-i / (dim/2)). `dim` must be even.
std::vector<double> time_embedding(int t, std::size_t dim);

/// eps_phi(x_t, s, t): predicts the injected noise from the noised action,
/// the conditioning state and the timestep.
class EpsilonPredictor {
 public:
  virtual ~EpsilonPredictor() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;

  /// Records predictions for a batch (rows of `noisy` and `states` align with
  /// `timesteps`). Learned weights go through `binding` so repeated records
  /// on one tape share a single set of leaves.
  virtual grad::Var record(grad::Tape& tape, grad::Var noisy, const grad::Array& states,
                           std::span<const int> timesteps, grad::ParamBinding& binding) const = 0;

  /// Plain evaluation; default implementation goes through a throwaway tape.
  virtual grad::Array predict(const grad::Array& noisy, const grad::Array& states,
                              std::span<const int> timesteps) const;
};

/// The trainable predictor: an MLP over concat(x_t, s, embed(t)).
class NoisePredictor final : public EpsilonPredictor {
 public:
  NoisePredictor() = default;
  NoisePredictor(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden,
                 std::size_t embed_dim, Rng& rng);
  NoisePredictor(grad::Mlp net, std::size_t state_dim, std::size_t action_dim, std::size_t embed_dim);

  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  std::size_t embed_dim() const { return embed_dim_; }
  grad::Mlp& net() { return net_; }
  const grad::Mlp& net() const { return net_; }

  grad::Var record(grad::Tape& tape, grad::Var noisy, const grad::Array& states, std::span<const int> timesteps,
                   grad::ParamBinding& binding) const override;
  grad::Array predict(const grad::Array& noisy, const grad::Array& states,
                      std::span<const int> timesteps) const override;

 private:
  grad::Array conditioning(const grad::Array& states, std::span<const int> timesteps) const;

  grad::Mlp net_;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t embed_dim_ = 16;
};

enum class TimestepMode { all, sampled };

const char* timestep_mode_name(TimestepMode m);
TimestepMode parse_timestep_mode(const std::string& name);

/// How F is averaged: over every timestep (all) or `timestep_samples`
/// uniform draws per query (sampled), with `noise_draws` (K) fresh noise
/// vectors per timestep.
struct NllOptions {
  TimestepMode mode = TimestepMode::all;
  int noise_draws = 4;
  int timestep_samples = 8;
};

struct DensityQuery {
  std::vector<double> state;
  std::vector<double> action;
  NllOptions options;
};

/// Monte-Carlo denoising loss E||eps - eps_phi(sqrt(ab_t) a + sqrt(1-ab_t) eps, s, t)||^2
/// over t ~ U{1..T} (one draw per row) and eps ~ N(0, I).
double diffusion_loss(const EpsilonPredictor& predictor, const VarianceSchedule& schedule,
                      const grad::Array& states, const grad::Array& actions, Rng& rng);

/// One Adam step on the denoising loss; returns the pre-step batch loss.
/// Throws NumericError (predictor untouched) if the loss is not finite.
double diffusion_train_step(NoisePredictor& predictor, grad::AdamState& adam, const VarianceSchedule& schedule,
                            const grad::Array& states, const grad::Array& actions, Rng& rng);

/// F(a|s) for one query.
double estimate_nll(const EpsilonPredictor& predictor, const VarianceSchedule& schedule, const DensityQuery& query,
                    Rng& rng);

/// F for each row of (states, actions).
std::vector<double> estimate_nll_batch(const EpsilonPredictor& predictor, const VarianceSchedule& schedule,
                                       const grad::Array& states, const grad::Array& actions,
                                       const NllOptions& options, Rng& rng);

/// Records F on the tape as a (B x 1) node differentiable in `actions`. The
/// predictor's weights enter as constants.
grad::Var record_nll(grad::Tape& tape, const EpsilonPredictor& predictor, const VarianceSchedule& schedule,
                     grad::Var actions, const grad::Array& states, const NllOptions& options, Rng& rng);

/// Ancestral sampling x_T ~ N(0, I) -> x_0 for each state row, clipped to [-1, 1].
grad::Array reverse_sample(const EpsilonPredictor& predictor, const VarianceSchedule& schedule,
                           const grad::Array& states, Rng& rng);

/// BehaviorDensity backed by a diffusion model.
class DiffusionDensity final : public BehaviorDensity {
 public:
  DiffusionDensity(const EpsilonPredictor& predictor, const VarianceSchedule& schedule, NllOptions options)
      : predictor_(&predictor), schedule_(&schedule), options_(options) {}

  grad::Var record_nll(grad::Tape& tape, grad::Var actions, const grad::Array& states, Rng& rng) const override;
  std::vector<double> nll(const grad::Array& states, const grad::Array& actions, Rng& rng) const override;

 private:
  const EpsilonPredictor* predictor_;
  const VarianceSchedule* schedule_;
  NllOptions options_;
};

/// Predictor checkpoint: grad-core checkpoint whose "extra" block carries
/// the schedule and the predictor dimensions.
void save_predictor(const std::filesystem::path& path, const NoisePredictor& predictor,
                    const VarianceSchedule& schedule);
NoisePredictor load_predictor(const std::filesystem::path& path, VarianceSchedule* schedule = nullptr);

}  // namespace osc::diffusion
