#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "osc/data/dataset.hpp"
#include "osc/errors.hpp"
#include "osc/harness/config.hpp"
#include "osc/harness/experiment.hpp"
#include "osc/harness/reports.hpp"
#include "osc/io.hpp"
#include "osc/tabular/tabular.hpp"

namespace fs = std::filesystem;
using namespace osc;
using namespace osc::harness;

namespace {

struct Common {
  std::string config;
  std::int64_t seed = -1;
  std::string out = "runs";
  bool resume = false;
  std::string stage;
  int jobs = 1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_flag("--resume", c.resume, "reuse completed stages found in --out");
  cmd->add_option("--stage", c.stage, "last stage to run (data, density, agent, eval, finetune)");
  cmd->add_option("--jobs", c.jobs, "parallel seeds for ablate and sweep")->capture_default_str();
  cmd->add_flag("--quiet", c.quiet, "suppress progress messages");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  return cfg;
}

RunOptions run_options(const Common& c, const std::string& stop_after) {
  RunOptions o;
  o.resume = c.resume;
  o.stop_after = c.stage.empty() ? stop_after : c.stage;
  if (!c.quiet) o.log = [](const std::string& msg) { std::cerr << msg << "\n"; };
  return o;
}

std::vector<std::uint64_t> seed_list(std::int64_t first, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(static_cast<std::uint64_t>(std::max<std::int64_t>(first, 0) + i));
  return seeds;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    if (end > start) out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

void print_record(const RunRecord& r) {
  std::printf("%s seed %llu [%s]", r.objective.c_str(), static_cast<unsigned long long>(r.seed), r.config_hash.c_str());
  if (!r.ok()) {
    std::printf(" FAILED in %s: %s\n", r.failed_stage.c_str(), r.error.c_str());
    return;
  }
  std::printf(" stages:");
  for (const auto& s : r.completed_stages) std::printf(" %s", s.c_str());
  if (r.offline_eval) std::printf("  return %.4f  success %.3f", r.offline_eval->mean_return, r.offline_eval->success_rate);
  if (r.finetune_eval)
    std::printf("  fine-tuned return %.4f  success %.3f", r.finetune_eval->mean_return, r.finetune_eval->success_rate);
  if (r.behavior_eval) std::printf("  behavior %.4f", r.behavior_eval->mean_return);
  if (r.oracle_eval) std::printf("  oracle %.4f", r.oracle_eval->mean_return);
  std::printf("\n");
}

int single_run(const Common& c, const std::string& stop_after, bool force_finetune = false) {
  ExperimentConfig cfg = load(c);
  if (force_finetune) cfg.finetune.enabled = true;
  const RunRecord r = run_experiment(cfg, c.out, run_options(c, stop_after));
  print_record(r);
  if (r.ok() && (r.offline_eval || r.finetune_eval)) emit_reports({r}, fs::path(c.out) / "reports");
  return r.ok() ? 0 : 1;
}

int gen_data(const Common& c) {
  const int rc = single_run(c, "data");
  if (rc != 0) return rc;
  const ExperimentConfig cfg = load(c);
  for (const auto& e : fs::directory_iterator(fs::path(c.out) / "stages")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("data-", 0) == 0 && name.size() > 2 && name.ends_with("-s" + std::to_string(cfg.seed))) {
      const fs::path csv = fs::path(c.out) / (name + ".csv");
      data::export_csv(csv, data::load_dataset(e.path() / "dataset.bin"));
      std::printf("wrote %s\n", csv.string().c_str());
    }
  }
  return 0;
}

int tabular_demo(const Common& c) {
  tabular::DemoConfig cfg;
  if (!c.config.empty()) cfg = tabular::demo_config_from_json(nlohmann::json::parse(io::read_text(c.config)));
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  const tabular::DemoResult result = tabular::run_tabular_demo(cfg);
  const fs::path out(c.out);
  fs::create_directories(out);
  const std::string tag = hash_json(tabular::demo_config_to_json(cfg)) + "-s" + std::to_string(cfg.seed);
  tabular::export_heatmap(out / ("heatmap-behavior-" + tag), "Behavior policy",
                          tabular::optimal_action_grid(result.model));
  tabular::export_heatmap(out / ("heatmap-oracle-" + tag), "Supported value iteration",
                          tabular::optimal_action_grid(cfg.grid, result.oracle.policy));
  for (const auto& run : result.runs) {
    const std::string name = tabular::objective_name(run.objective);
    tabular::export_heatmap(out / ("heatmap-" + name + "-" + tag), name, tabular::optimal_action_grid(cfg.grid, run.policy));
  }
  const nlohmann::json summary = tabular::demo_summary(cfg, result);
  io::write_text(out / ("tabular-summary-" + tag + ".json"), summary.dump(2) + "\n");
  std::printf("%s\n", summary.dump(2).c_str());
  return 0;
}

int ablate(const Common& c, const std::string& objectives, int seeds) {
  std::vector<Objective> arms;
  for (const auto& name : split(objectives)) arms.push_back(parse_objective(name));
  const auto records = run_ablation(load(c), arms, seed_list(c.seed, seeds), c.out, run_options(c, c.stage), c.jobs);
  for (const auto& r : records) print_record(r);
  for (const auto& p : emit_reports(records, fs::path(c.out) / "reports")) std::printf("wrote %s\n", p.string().c_str());
  return std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.ok(); }) ? 0 : 1;
}

int sweep(const Common& c, const std::string& param, const std::string& values, int seeds) {
  std::vector<nlohmann::json> points;
  for (const auto& v : split(values)) points.push_back(nlohmann::json::parse(v));
  const auto result = run_sweep(load(c), param, points, seed_list(c.seed, seeds), c.out, run_options(c, c.stage), c.jobs);
  for (const auto& p : result)
    for (const auto& r : p.records) print_record(r);
  for (const auto& p : emit_sweep_report(param, result, fs::path(c.out) / "reports"))
    std::printf("wrote %s\n", p.string().c_str());
  return 0;
}

int plot(const Common& c) {
  std::vector<RunRecord> records;
  for (const auto& e : fs::directory_iterator(c.out)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("run-", 0) == 0 && name.ends_with(".json"))
      records.push_back(nlohmann::json::parse(io::read_text(e.path())).get<RunRecord>());
  }
  if (records.empty()) throw ContractError("no run records in " + c.out);
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.objective, a.seed, a.config_hash) < std::tie(b.objective, b.seed, b.config_hash);
  });
  for (const auto& p : emit_reports(records, fs::path(c.out) / "reports")) std::printf("wrote %s\n", p.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline RL workbench: support-constrained TD3 with diffusion behavior densities"};
  app.require_subcommand(1);
  Common common;
  std::string objectives = "osc,spot-diffusion,osc-kernel,spot-kernel";
  std::string param, values;
  int seeds = 5;

  auto* gen = app.add_subcommand("gen-data", "generate the behavior dataset");
  auto* dif = app.add_subcommand("train-diffusion", "fit the behavior density");
  auto* agent = app.add_subcommand("train-agent", "offline agent training");
  auto* eval = app.add_subcommand("eval", "train if needed and evaluate the agent");
  auto* fine = app.add_subcommand("finetune", "full pipeline including online fine-tuning");
  auto* run = app.add_subcommand("run", "full pipeline as configured (see --stage)");
  for (auto* cmd : {gen, dif, agent, eval, fine, run}) add_common(cmd, common);
  auto* demo = app.add_subcommand("tabular-demo", "gridworld conservatism demonstration");
  add_common(demo, common, false);
  auto* abl = app.add_subcommand("ablate", "objective x estimator ablation over seeds");
  add_common(abl, common);
  abl->add_option("--objectives", objectives, "comma-separated objectives")->capture_default_str();
  abl->add_option("--seeds", seeds, "number of seeds, starting at --seed")->capture_default_str();
  auto* swp = app.add_subcommand("sweep", "vary one config value over seeds");
  add_common(swp, common);
  swp->add_option("--param", param, "JSON pointer into the config, e.g. /agent/td3/penalty/lambda")->required();
  swp->add_option("--values", values, "comma-separated JSON values")->required();
  swp->add_option("--seeds", seeds, "number of seeds, starting at --seed")->capture_default_str();
  auto* plt = app.add_subcommand("plot", "re-emit reports from the run records in --out");
  add_common(plt, common, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(common);
    if (*dif) return single_run(common, "density");
    if (*agent) return single_run(common, "agent");
    if (*eval) return single_run(common, "eval");
    if (*fine) return single_run(common, "", true);
    if (*run) return single_run(common, "");
    if (*demo) return tabular_demo(common);
    if (*abl) return ablate(common, objectives, seeds);
    if (*swp) return sweep(common, param, values, seeds);
    if (*plt) return plot(common);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
