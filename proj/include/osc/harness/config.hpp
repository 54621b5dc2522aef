#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "osc/agent/td3.hpp"
#include "osc/diffusion/model.hpp"
#include "osc/kernel_density.hpp"

namespace osc::harness {

/// Which actor objective and which density estimator a run uses.
enum class Objective { osc, spot_diffusion, osc_kernel, spot_kernel, td3_unconstrained };

const char* objective_name(Objective o);
Objective parse_objective(const std::string& name);
agent::Constraint objective_constraint(Objective o);
bool uses_diffusion(Objective o);
bool uses_kernel(Objective o);

struct DataBlock {
  /// Existing dataset file; when empty the dataset is generated from the
  /// environment's behavior policy.
  std::string path;
  std::size_t transitions = 20000;
};

struct DiffusionBlock {
  int steps = 20;
  double beta_min = 1e-4;
  double beta_max = 0.2;
  std::vector<std::size_t> hidden{128, 128};
  std::size_t embed_dim = 16;
  int train_steps = 5000;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  /// Estimator settings used by the actor and for eps_breve selection.
  diffusion::NllOptions nll{diffusion::TimestepMode::sampled, 1, 4};
};

struct AgentBlock {
  agent::TD3Config td3;
  /// eps_breve is this quantile of F over dataset (s, a) pairs.
  double eps_quantile = 0.98;
  /// Rows of the dataset used for the quantile (all when smaller).
  std::size_t eps_sample = 2000;
  int train_steps = 20000;
};

struct EvalBlock {
  int episodes = 10;
  int seeds = 5;
};

struct FinetuneBlock {
  bool enabled = false;
  agent::FinetuneOptions options;
};

struct ExperimentConfig {
  static constexpr int kFormatVersion = 1;

  std::string name = "experiment";
  std::uint64_t seed = 0;
  nlohmann::json env = {{"kind", "point-mass"}};
  DataBlock data;
  DiffusionBlock diffusion;
  KernelOptions kernel;
  AgentBlock agent;
  Objective objective = Objective::osc;
  EvalBlock eval;
  FinetuneBlock finetune;

  /// ContractError on any invalid block, unknown environment or missing
  /// dataset path. Nothing is run before this passes.
  void validate() const;
  /// The TD3 settings with the objective applied (constraint, lambda = 0 for
  /// the unconstrained arm).
  agent::TD3Config td3() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys take their defaults; unknown top-level keys and a wrong
/// format_version are rejected. Validates.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::string& path);

/// 16 hex digits of FNV-1a over the canonical JSON with the seed removed, so
/// runs of one configuration under different seeds share a hash.
std::string config_hash(const ExperimentConfig& c);
std::string hash_json(const nlohmann::json& j);

/// Sets the value at a JSON pointer (e.g. "/agent/td3/penalty/lambda") and
/// re-parses the result.
ExperimentConfig with_value(const ExperimentConfig& c, const std::string& pointer, const nlohmann::json& value);

}  // namespace osc::harness
