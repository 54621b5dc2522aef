#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "osc/envs/env.hpp"
#include "osc/grad/array.hpp"
#include "osc/rng.hpp"

namespace osc::data {

inline constexpr int kDatasetVersion = 1;

/// Per-dimension summaries of states and actions (population std).
struct DatasetStats {
  std::size_t count = 0;
  std::vector<double> state_min, state_max, state_mean, state_std;
  std::vector<double> action_min, action_max, action_mean, action_std;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

nlohmann::json stats_to_json(const DatasetStats& stats);
DatasetStats stats_from_json(const nlohmann::json& j);

/// Column-major store of (s, a, r, s', done) transitions. Discrete actions are
/// stored as their index in a single action column.
struct Dataset {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  bool discrete = false;
  std::vector<double> states;
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<double> next_states;
  std::vector<std::uint8_t> dones;
  /// spec() of the environment that produced the data.
  nlohmann::json env = nlohmann::json::object();

  std::size_t size() const { return rewards.size(); }
  bool empty() const { return rewards.empty(); }
  std::span<const double> state(std::size_t i) const { return {states.data() + i * state_dim, state_dim}; }
  std::span<const double> action(std::size_t i) const { return {actions.data() + i * action_dim, action_dim}; }
  std::span<const double> next_state(std::size_t i) const { return {next_states.data() + i * state_dim, state_dim}; }

  /// Appends a transition; DimensionError on width mismatch, NumericError on a
  /// non-finite reward.
  void push(std::span<const double> s, std::span<const double> a, double r, std::span<const double> s2, bool done);

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

DatasetStats compute_stats(const Dataset& dataset);

/// Runs behavior episodes until `count` transitions are stored. Episodes reset
/// on a terminal transition or at the environment horizon.
Dataset collect_dataset(envs::Environment& env, const envs::BehaviorFn& behavior, std::size_t count, Rng& rng);

/// Framed file: JSON header (format, format_version, count, dims, stats, env)
/// then fp64 states, actions, rewards, next states and one byte per done flag.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
/// FormatError on version mismatch, truncation or inconsistent shapes.
Dataset load_dataset(const std::filesystem::path& path);

void export_csv(const std::filesystem::path& path, const Dataset& dataset);

/// Per-dimension affine map from [min, max] onto [-1, 1]. A dimension whose
/// range is zero maps to 0 and is flagged; its inverse returns the constant.
struct ActionScaler {
  std::vector<double> low;
  std::vector<double> high;
  std::vector<bool> zero_range;

  std::size_t dim() const { return low.size(); }
  bool any_zero_range() const;
  std::vector<double> normalize(std::span<const double> a) const;
  std::vector<double> denormalize(std::span<const double> x) const;

  friend bool operator==(const ActionScaler&, const ActionScaler&) = default;
};

nlohmann::json scaler_to_json(const ActionScaler& scaler);
ActionScaler scaler_from_json(const nlohmann::json& j);
/// Scaler from fixed bounds (used for environment action boxes).
ActionScaler bounds_scaler(std::size_t dim, double low, double high);

struct NormalizedDataset {
  Dataset data;
  DatasetStats stats;
  ActionScaler scaler;
};

/// ContractError on an empty dataset.
NormalizedDataset normalize_actions(const Dataset& dataset);

/// Minibatch as (B x dim) arrays; rewards and dones are (B x 1).
struct Batch {
  grad::Array states;
  grad::Array actions;
  grad::Array rewards;
  grad::Array next_states;
  grad::Array dones;
};

Batch gather(const Dataset& dataset, std::span<const std::size_t> rows);
/// Uniform sampling with replacement.
Batch sample_batch(const Dataset& dataset, std::size_t size, Rng& rng);
/// All states (or actions) of the dataset as one array.
grad::Array state_array(const Dataset& dataset);
grad::Array action_array(const Dataset& dataset);

}  // namespace osc::data
