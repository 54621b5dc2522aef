#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "osc/agent/td3.hpp"
#include "osc/harness/config.hpp"
#include "osc/harness/eval.hpp"

namespace osc::harness {

/// Pipeline stages in execution order. "density" trains the diffusion model
/// or fits the kernel estimator (a no-op for td3-unconstrained); "finetune"
/// runs only when the config enables it.
inline const std::vector<std::string> kStages{"data", "density", "agent", "eval", "finetune"};

struct RunOptions {
  /// Reuse completed stage directories found under the output directory.
  bool resume = false;
  /// Last stage to execute; empty runs everything.
  std::string stop_after;
  /// Progress messages; silent when empty.
  std::function<void(const std::string&)> log;
};

struct RunRecord {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string objective;
  std::vector<std::string> completed_stages;
  /// Stages that were loaded from disk instead of recomputed.
  std::vector<std::string> resumed_stages;
  std::string failed_stage;
  std::string error;
  double eps_breve = 0.0;
  std::vector<std::pair<int, double>> diffusion_losses;
  std::vector<agent::StepMetrics> offline_metrics;
  std::vector<agent::StepMetrics> finetune_metrics;
  std::optional<EvalSummary> offline_eval;
  std::optional<EvalSummary> finetune_eval;
  std::optional<EvalSummary> behavior_eval;
  std::optional<EvalSummary> oracle_eval;
  double wall_seconds = 0.0;
  /// Artifact path (relative to the output directory) -> FNV-1a hex digest.
  std::map<std::string, std::string> checksums;

  bool ok() const { return failed_stage.empty(); }
  bool completed(const std::string& stage) const;
  /// The final evaluation: fine-tuned when available, offline otherwise.
  const EvalSummary& final_eval() const;
};

/// Summary JSON (metric series are written as CSV files next to it).
void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// Runs the staged pipeline into `out`. Each stage writes its artifacts to
/// out/stages/<stage>-<key>-s<seed>/, where the key hashes the parts of the
/// config the stage depends on; arms that share upstream settings therefore
/// share those directories. The record goes to out/run-<hash>-s<seed>.json.
///
/// An invalid config throws ContractError before any work. A failing stage
/// yields a partial record with failed_stage and error set.
RunRecord run_experiment(const ExperimentConfig& config, const std::filesystem::path& out,
                         const RunOptions& options = {});

/// Every objective under every seed; completed shared stages are always
/// reused. Seeds may run on `jobs` threads (arms within a seed stay
/// sequential because they share stage directories).
std::vector<RunRecord> run_ablation(const ExperimentConfig& base, const std::vector<Objective>& objectives,
                                    const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out,
                                    RunOptions options = {}, int jobs = 1);

struct SweepPoint {
  nlohmann::json value;
  std::vector<RunRecord> records;
};

/// Sets `pointer` to each value and runs every seed.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::string& pointer,
                                  const std::vector<nlohmann::json>& values, const std::vector<std::uint64_t>& seeds,
                                  const std::filesystem::path& out, RunOptions options = {}, int jobs = 1);

/// Mean over records of final_eval().mean_return.
double mean_final_return(const std::vector<RunRecord>& records);

}  // namespace osc::harness
