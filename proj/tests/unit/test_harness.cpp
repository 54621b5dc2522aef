#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "osc/envs/grid.hpp"
#include "osc/errors.hpp"
#include "osc/harness/config.hpp"
#include "osc/harness/eval.hpp"
#include "osc/harness/experiment.hpp"
#include "osc/harness/reports.hpp"
#include "osc/io.hpp"
#include "osc/tabular/tabular.hpp"

using namespace osc;
using namespace osc::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("osc_harness_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.name = "tiny";
  c.seed = 3;
  c.env = {{"kind", "point-mass"}, {"horizon", 10}};
  c.data.transitions = 400;
  c.diffusion.steps = 5;
  c.diffusion.hidden = {16};
  c.diffusion.train_steps = 40;
  c.diffusion.batch_size = 32;
  c.kernel.reference_size = 100;
  c.agent.td3.hidden = {16};
  c.agent.td3.batch_size = 32;
  c.agent.train_steps = 60;
  c.agent.eps_sample = 100;
  c.eval.episodes = 2;
  c.eval.seeds = 2;
  return c;
}

std::map<std::string, std::string> checksums_matching(const RunRecord& r, const std::string& needle) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : r.checksums)
    if (k.find(needle) != std::string::npos) out[k] = v;
  return out;
}

RunRecord fake_record(const std::string& objective, std::uint64_t seed, double ret) {
  RunRecord r;
  r.config = {{"objective", objective}};
  r.seed = seed;
  r.config_hash = hash_json(r.config);
  r.objective = objective;
  r.completed_stages = {"data", "density", "agent", "eval"};
  r.offline_eval = EvalSummary{4, ret, 0.5, 0.25, {ret, ret}};
  r.behavior_eval = EvalSummary{4, -10.0, 0.0, 0.0, {-10.0}};
  r.oracle_eval = EvalSummary{4, 0.0, 0.0, 1.0, {0.0}};
  r.offline_metrics = {{1, 0.5, -1.0, NAN, NAN, 1.0}, {2, 0.25, -0.5, 1.5, 0.25, 1.0}};
  return r;
}

}  // namespace

TEST_CASE("config json round trip, hashing and overrides") {
  ExperimentConfig c = tiny_config();
  c.objective = Objective::spot_kernel;
  const nlohmann::json j = c;
  const auto back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.objective == Objective::spot_kernel);

  ExperimentConfig other = c;
  other.seed = 99;
  CHECK(config_hash(other) == config_hash(c));
  other.agent.td3.penalty.lambda = 2.0;
  CHECK(config_hash(other) != config_hash(c));

  const auto swept = with_value(c, "/agent/td3/penalty/lambda", 5.0);
  CHECK(swept.agent.td3.penalty.lambda == 5.0);
  CHECK(swept.td3().constraint == agent::Constraint::spot);

  c.objective = Objective::td3_unconstrained;
  CHECK(c.td3().penalty.lambda == 0.0);
  CHECK_FALSE(c.td3().penalty_active());
}

TEST_CASE("invalid configs are rejected") {
  nlohmann::json j = tiny_config();
  auto rejects = [&](const char* pointer, const nlohmann::json& value) {
    nlohmann::json bad = j;
    bad[nlohmann::json::json_pointer(pointer)] = value;
    CHECK_THROWS_AS(bad.get<ExperimentConfig>(), ContractError);
  };
  rejects("/format_version", 7);
  rejects("/objective", "brac");
  rejects("/surprise", 1);
  rejects("/env/kind", "maze");
  rejects("/data/path", "/nonexistent/dataset.bin");
  rejects("/eval/episodes", 0);
  rejects("/agent/eps_quantile", 1.0);
  rejects("/agent/td3/tau", 0.0);
  rejects("/diffusion/embed_dim", 3);
  rejects("/diffusion/beta_max", 1.5);
  CHECK_THROWS_AS(run_experiment(tiny_config(), fresh_dir("badstage"), RunOptions{false, "train", {}}), ContractError);
}

TEST_CASE("evaluation contracts and determinism") {
  auto grid = envs::make_environment({{"kind", "gridworld-continuous"}, {"grid", {{"random_starts", false}}}});
  const auto oracle = make_oracle(grid->spec());
  REQUIRE(oracle.has_value());
  const EvalSummary s = eval_policy(*oracle, *grid, 5, 2, Rng(1));
  CHECK(s.episodes == 10);
  CHECK(s.success_rate == 1.0);
  CHECK(s.std_return == 0.0);
  CHECK_THROWS_AS(eval_policy(*oracle, *grid, 0, 1, Rng(1)), ContractError);
  CHECK_THROWS_AS(eval_policy(*oracle, *grid, 1, 0, Rng(1)), ContractError);

  auto pm = envs::make_environment({{"kind", "point-mass"}});
  const auto behavior = envs::make_behavior(pm->spec());
  CHECK(eval_policy(behavior, *pm, 3, 2, Rng(4)) == eval_policy(behavior, *pm, 3, 2, Rng(4)));
  CHECK_FALSE(make_oracle({{"kind", "unknown"}}).has_value());
}

TEST_CASE("supported-optimal tabular policy succeeds on the gridworld") {
  tabular::DemoConfig cfg;
  cfg.transitions = 20000;
  const tabular::DemoResult demo = tabular::run_tabular_demo(cfg);
  envs::GridSpec spec = cfg.grid;
  const envs::GridEnv env(spec, false, true);
  envs::GridEnv rollout(spec, false, false);
  const std::vector<int> actions = demo.oracle.policy;
  const envs::BehaviorFn policy = [&](std::span<const double> state, Rng&) {
    return std::vector<double>{static_cast<double>(actions[spec.index(env.cell_of(state))])};
  };
  const EvalSummary s = eval_policy(policy, rollout, 3, 1, Rng(2));
  CHECK(s.success_rate == 1.0);
  CHECK(s.std_return == 0.0);
}

TEST_CASE("pipeline runs are reproducible and resumable") {
  const ExperimentConfig cfg = tiny_config();
  const fs::path a = fresh_dir("run_a"), b = fresh_dir("run_b");
  const RunRecord first = run_experiment(cfg, a);
  const RunRecord second = run_experiment(cfg, b);
  REQUIRE(first.ok());
  CHECK(first.completed_stages == std::vector<std::string>{"data", "density", "agent", "eval"});
  CHECK(*first.offline_eval == *second.offline_eval);
  CHECK(first.checksums == second.checksums);
  CHECK(first.offline_metrics.size() == 60);
  CHECK(fs::exists(a / ("run-" + first.config_hash + "-s3.json")));
  CHECK(std::isfinite(first.eps_breve));

  // drop the downstream stages and resume: they come back bit for bit
  for (const auto& e : fs::directory_iterator(a / "stages")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("agent-", 0) == 0 || name.rfind("eval-", 0) == 0) fs::remove_all(e.path());
  }
  const RunRecord resumed = run_experiment(cfg, a, RunOptions{true, "", {}});
  INFO(resumed.error);
  REQUIRE(resumed.ok());
  CHECK(resumed.resumed_stages == std::vector<std::string>{"data", "density"});
  CHECK(*resumed.offline_eval == *first.offline_eval);
  CHECK(resumed.checksums == first.checksums);
  CHECK(resumed.eps_breve == first.eps_breve);

  // a full resume recomputes nothing
  const RunRecord again = run_experiment(cfg, a, RunOptions{true, "", {}});
  CHECK(again.resumed_stages == again.completed_stages);
  CHECK(again.offline_metrics.size() == first.offline_metrics.size());
  CHECK(again.offline_metrics.back().td_loss == first.offline_metrics.back().td_loss);

  // stop after a named stage
  const RunRecord partial = run_experiment(cfg, fresh_dir("run_c"), RunOptions{false, "density", {}});
  CHECK(partial.completed_stages == std::vector<std::string>{"data", "density"});
  CHECK_FALSE(partial.offline_eval.has_value());
  for (const auto& d : {a, b}) fs::remove_all(d);
}

TEST_CASE("the unconstrained arm matches osc with lambda = 0") {
  ExperimentConfig osc0 = tiny_config();
  osc0.agent.td3.penalty.lambda = 0.0;
  ExperimentConfig plain = tiny_config();
  plain.objective = Objective::td3_unconstrained;
  const fs::path out = fresh_dir("lambda0");
  const RunRecord r1 = run_experiment(osc0, out);
  const RunRecord r2 = run_experiment(plain, out);
  REQUIRE(r1.ok());
  REQUIRE(r2.ok());
  auto nets = [](const RunRecord& r) {
    std::vector<std::string> sums;
    for (const auto& [k, v] : checksums_matching(r, "/agent/"))
      if (k.ends_with(".ckpt")) sums.push_back(fs::path(k).filename().string() + v);
    return sums;
  };
  CHECK(nets(r1).size() == 6);
  CHECK(nets(r1) == nets(r2));
  CHECK(*r1.offline_eval == *r2.offline_eval);
  fs::remove_all(out);
}

TEST_CASE("kernel arm and fine-tuning run through the pipeline") {
  ExperimentConfig cfg = tiny_config();
  cfg.objective = Objective::osc_kernel;
  cfg.finetune.enabled = true;
  cfg.finetune.options.online_steps = 30;
  cfg.finetune.options.schedule = {1.0, 0.0, 20, agent::DecayMode::linear};
  const fs::path out = fresh_dir("kernel");
  const RunRecord r = run_experiment(cfg, out);
  REQUIRE(r.ok());
  CHECK(r.completed("finetune"));
  CHECK(r.finetune_metrics.size() == 30);
  CHECK(r.finetune_metrics.back().lambda == 0.0);
  CHECK(r.finetune_eval.has_value());
  CHECK(&r.final_eval() == &*r.finetune_eval);
  CHECK_FALSE(checksums_matching(r, "kernel.json").empty());
  fs::remove_all(out);
}

TEST_CASE("a failing stage yields a partial record") {
  const fs::path out = fresh_dir("failing");
  fs::create_directories(out);
  io::write_text(out / "broken.bin", "not a dataset\n");
  ExperimentConfig cfg = tiny_config();
  cfg.data.path = (out / "broken.bin").string();
  const RunRecord r = run_experiment(cfg, out);
  CHECK_FALSE(r.ok());
  CHECK(r.failed_stage == "data");
  CHECK(r.completed_stages.empty());
  CHECK_FALSE(r.error.empty());
  const auto saved = nlohmann::json::parse(io::read_text(out / ("run-" + r.config_hash + "-s3.json"))).get<RunRecord>();
  CHECK(saved.failed_stage == "data");
  fs::remove_all(out);
}

TEST_CASE("metrics csv round trip keeps NaN and full precision") {
  const fs::path dir = fresh_dir("csv");
  fs::create_directories(dir);
  const auto rec = fake_record("osc", 1, -3.0);
  std::vector<agent::StepMetrics> m = rec.offline_metrics;
  m[1].td_loss = 0.1 + 0.2;
  write_metrics_csv(dir / "m.csv", m);
  const auto back = read_metrics_csv(dir / "m.csv");
  REQUIRE(back.size() == 2);
  CHECK(std::isnan(back[0].mean_f));
  CHECK(back[1].td_loss == m[1].td_loss);
  io::write_text(dir / "bad.csv", "step,td_loss\n1,2\n");
  CHECK_THROWS_AS(read_metrics_csv(dir / "bad.csv"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("reports: single record, ablation bars and sweep curves") {
  const fs::path out = fresh_dir("reports");
  const auto single = emit_reports({fake_record("osc", 0, -2.0)}, out);
  REQUIRE(single.size() == 2);
  CHECK(single[0].extension() == ".csv");
  CHECK(single[1].extension() == ".json");
  CHECK(single[0].filename().string().find("-s0") != std::string::npos);

  std::vector<RunRecord> records;
  for (std::uint64_t s : {0, 1}) {
    records.push_back(fake_record("osc", s, -2.0));
    records.push_back(fake_record("spot-diffusion", s, -4.0));
    records.push_back(fake_record("osc-kernel", s, -3.0));
  }
  const auto files = emit_reports(records, out);
  CHECK(files.size() == 14);
  const std::string svg = io::read_text(files.back());
  CHECK(files.back().extension() == ".svg");
  // osc-kernel (10 points lost) is drawn before spot-diffusion (20 points lost)
  CHECK(svg.find("osc-kernel") < svg.find("spot-diffusion"));
  const std::string table = io::read_text(files[files.size() - 2]);
  CHECK(table.find("spot-diffusion,2,-4,0,60,20") != std::string::npos);

  std::vector<SweepPoint> points;
  for (double lambda : {0.1, 0.5, 1.0, 2.0, 5.0}) points.push_back({lambda, {fake_record("osc", 0, -lambda)}});
  const auto sweep = emit_sweep_report("/agent/td3/penalty/lambda", points, out);
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[1].filename().string().rfind("sweep-lambda-", 0) == 0);
  const std::string curve = io::read_text(sweep[0]);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 6);

  CHECK_THROWS_AS(emit_reports({}, out), ContractError);
  io::write_text(out / "blocker", "x");
  CHECK_THROWS_AS(emit_reports({fake_record("osc", 0, -2.0)}, out / "blocker" / "sub"), ReportError);
  fs::remove_all(out);
}
