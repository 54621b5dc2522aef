#pragma once

#include <filesystem>

#include "json.hpp"

#include "osc/grad/mlp.hpp"

namespace osc::grad {

inline constexpr int kCheckpointVersion = 1;

/// Writes the network as a framed file: JSON header (format, format_version,
/// layer_sizes, hidden/output activation, optional caller block under "extra")
/// followed by every parameter as raw fp64 in `parameters()` order.
void save_checkpoint(const std::filesystem::path& path, const Mlp& mlp,
                     const nlohmann::json& extra = nlohmann::json::object());

/// Throws FormatError on version mismatch, truncation or shape inconsistency.
Mlp load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace osc::grad
