#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "osc/agent/td3.hpp"
#include "osc/harness/experiment.hpp"

namespace osc::harness {

/// Write failure during report emission; `written` lists what was already
/// produced.
class ReportError : public std::runtime_error {
 public:
  ReportError(const std::string& what, std::vector<std::filesystem::path> written)
      : std::runtime_error(what), written(std::move(written)) {}
  std::vector<std::filesystem::path> written;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<agent::StepMetrics>& metrics);
/// FormatError on a malformed file.
std::vector<agent::StepMetrics> read_metrics_csv(const std::filesystem::path& path);

struct ReportOptions {
  /// Reference returns for normalized scores, 100 (R - behavior) / (oracle - behavior).
  std::optional<double> behavior_return;
  std::optional<double> oracle_return;
};

/// Per record: metrics-<hash>-s<seed>.csv and summary-<hash>-s<seed>.json.
/// With more than one objective among the records, also an ablation table
/// and a bar chart of each arm's degradation relative to osc (largest
/// degradation last). ContractError on an empty list.
std::vector<std::filesystem::path> emit_reports(const std::vector<RunRecord>& records,
                                                const std::filesystem::path& out, const ReportOptions& options = {});

/// One CSV and one SVG curve for a parameter sweep, x = the swept value.
std::vector<std::filesystem::path> emit_sweep_report(const std::string& parameter, const std::vector<SweepPoint>& points,
                                                     const std::filesystem::path& out,
                                                     const ReportOptions& options = {});

}  // namespace osc::harness
