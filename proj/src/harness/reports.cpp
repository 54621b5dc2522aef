#include "osc/harness/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "osc/errors.hpp"
#include "osc/io.hpp"
#include "osc/report/svg.hpp"
#include "osc/stats.hpp"

namespace osc::harness {

namespace fs = std::filesystem;

void write_metrics_csv(const fs::path& path, const std::vector<agent::StepMetrics>& metrics) {
  std::string text = "step,td_loss,actor_objective,mean_f,activation_rate,lambda\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.step, m.td_loss, m.actor_objective,
                  m.mean_f, m.activation_rate, m.lambda);
    text += buf;
  }
  io::write_text(path, text);
}

std::vector<agent::StepMetrics> read_metrics_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,", 0) != 0) throw FormatError(path.string() + ": missing header");
  std::vector<agent::StepMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    agent::StepMetrics m;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &m.step, &m.td_loss, &m.actor_objective, &m.mean_f,
                    &m.activation_rate, &m.lambda) != 6) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    out.push_back(m);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string seed_tag(const std::vector<RunRecord>& records) {
  std::vector<std::uint64_t> seeds;
  for (const auto& r : records) seeds.push_back(r.seed);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::string tag = "s";
  for (std::size_t i = 0; i < seeds.size(); ++i) tag += (i ? "_" : "") + std::to_string(seeds[i]);
  return tag;
}

std::string group_hash(const std::vector<RunRecord>& records) {
  std::vector<std::string> hashes;
  for (const auto& r : records) hashes.push_back(r.config_hash);
  std::sort(hashes.begin(), hashes.end());
  return hash_json(hashes);
}

// Writes through a manifest so a failure can report what already exists.
struct Writer {
  std::vector<fs::path> written;

  void operator()(const fs::path& path, const std::string& text) {
    try {
      io::write_text(path, text);
    } catch (const std::exception& e) {
      throw ReportError("cannot write " + path.string() + ": " + e.what(), written);
    }
    written.push_back(path);
  }
};

// Reference returns from the options, else averaged from the records.
std::optional<std::pair<double, double>> references(const std::vector<RunRecord>& records,
                                                    const ReportOptions& options) {
  if (options.behavior_return && options.oracle_return) return std::pair{*options.behavior_return, *options.oracle_return};
  double b = 0.0, o = 0.0, n = 0.0;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    if (!r.behavior_eval || !r.oracle_eval) return std::nullopt;
    b += r.behavior_eval->mean_return;
    o += r.oracle_eval->mean_return;
    n += 1.0;
  }
  if (n == 0.0) return std::nullopt;
  return std::pair{options.behavior_return.value_or(b / n), options.oracle_return.value_or(o / n)};
}

double normalized(double r, const std::pair<double, double>& ref) {
  return 100.0 * (r - ref.first) / (ref.second - ref.first);
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

Aggregate aggregate(const std::vector<const RunRecord*>& records) {
  std::vector<double> v;
  for (const auto* r : records) v.push_back(r->final_eval().mean_return);
  return {stats::mean(v), v.size() > 1 ? stats::stddev(v) : 0.0, v.size()};
}

}  // namespace

std::vector<fs::path> emit_reports(const std::vector<RunRecord>& records, const fs::path& out,
                                   const ReportOptions& options) {
  require(!records.empty(), "emit_reports needs at least one record");
  Writer write;
  try {
    fs::create_directories(out);
  } catch (const std::exception& e) {
    throw ReportError("cannot create " + out.string() + ": " + e.what(), {});
  }
  std::map<std::string, std::vector<const RunRecord*>> by_objective;
  for (const auto& r : records) {
    const std::string tag = r.config_hash + "-s" + std::to_string(r.seed);
    std::vector<agent::StepMetrics> series = r.offline_metrics;
    series.insert(series.end(), r.finetune_metrics.begin(), r.finetune_metrics.end());
    const fs::path csv = out / ("metrics-" + tag + ".csv");
    try {
      write_metrics_csv(csv, series);
    } catch (const std::exception& e) {
      throw ReportError("cannot write " + csv.string() + ": " + e.what(), write.written);
    }
    write.written.push_back(csv);
    write(out / ("summary-" + tag + ".json"), nlohmann::json(r).dump(2) + "\n");
    if (r.ok() && (r.offline_eval || r.finetune_eval)) by_objective[r.objective].push_back(&r);
  }
  if (by_objective.size() < 2) return write.written;

  const auto ref = references(records, options);
  const std::string tag = group_hash(records) + "-" + seed_tag(records);
  std::string table = "objective,runs,mean_return,std_return,normalized_score,degradation\n";
  const auto base_it = by_objective.find("osc");
  const std::optional<Aggregate> base =
      base_it == by_objective.end() ? std::nullopt : std::optional(aggregate(base_it->second));
  auto score = [&](double r) { return ref ? normalized(r, *ref) : r; };
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& [objective, runs] : by_objective) {
    const Aggregate a = aggregate(runs);
    const double degradation = base ? score(base->mean) - score(a.mean) : std::nan("");
    table += objective + "," + std::to_string(a.n) + "," + fmt(a.mean) + "," + fmt(a.std) + "," +
             (ref ? fmt(normalized(a.mean, *ref)) : "") + "," + fmt(degradation) + "\n";
    if (base && objective != "osc") bars.emplace_back(objective, degradation);
  }
  write(out / ("ablation-" + tag + ".csv"), table);
  if (!bars.empty()) {
    std::stable_sort(bars.begin(), bars.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    write(out / ("ablation-" + tag + ".svg"),
          report::svg_bar_chart("Degradation relative to osc", ref ? "normalized score drop" : "return drop", bars));
  }
  return write.written;
}

std::vector<fs::path> emit_sweep_report(const std::string& parameter, const std::vector<SweepPoint>& points,
                                        const fs::path& out, const ReportOptions& options) {
  require(!points.empty(), "emit_sweep_report needs at least one point");
  Writer write;
  try {
    fs::create_directories(out);
  } catch (const std::exception& e) {
    throw ReportError("cannot create " + out.string() + ": " + e.what(), {});
  }
  std::string label = parameter.substr(parameter.find_last_of('/') + 1);
  if (label.empty()) label = "value";
  std::vector<RunRecord> all;
  for (const auto& p : points) all.insert(all.end(), p.records.begin(), p.records.end());
  const auto ref = references(all, options);

  report::Series series{"mean return", {}, {}};
  std::string table = label + ",runs,mean_return,std_return,normalized_score\n";
  for (const auto& p : points) {
    require(p.value.is_number(), "sweep values must be numbers to plot");
    std::vector<const RunRecord*> runs;
    for (const auto& r : p.records)
      if (r.ok()) runs.push_back(&r);
    require(!runs.empty(), "every sweep point needs at least one successful run");
    const Aggregate a = aggregate(runs);
    const double x = p.value.get<double>();
    table += fmt(x) + "," + std::to_string(a.n) + "," + fmt(a.mean) + "," + fmt(a.std) + "," +
             (ref ? fmt(normalized(a.mean, *ref)) : "") + "\n";
    series.x.push_back(x);
    series.y.push_back(ref ? normalized(a.mean, *ref) : a.mean);
  }
  const std::string stem = "sweep-" + label + "-" + group_hash(all) + "-" + seed_tag(all);
  write(out / (stem + ".csv"), table);
  write(out / (stem + ".svg"), report::svg_line_plot("Sweep over " + label, label,
                                                     ref ? "normalized score" : "mean return", {series}));
  return write.written;
}

}  // namespace osc::harness
