// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   acceptance [--only N[,N...]] [--work DIR]

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "osc/agent/td3.hpp"
#include "osc/data/dataset.hpp"
#include "osc/diffusion/model.hpp"
#include "osc/envs/env.hpp"
#include "osc/grad/adam.hpp"
#include "osc/grad/gradcheck.hpp"
#include "osc/harness/config.hpp"
#include "osc/harness/experiment.hpp"
#include "osc/harness/reports.hpp"
#include "osc/penalty.hpp"
#include "osc/stats.hpp"
#include "osc/tabular/tabular.hpp"

using namespace osc;
using grad::Array;
using grad::Mlp;
using grad::Tape;
using grad::Var;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_work;

void progress(const std::string& msg) { std::fprintf(stderr, "  %s\n", msg.c_str()); }

// ---------------------------------------------------------------- 1

bool kink_free(const Mlp& mlp, const Array& input, double margin) {
  Array h = input;
  for (std::size_t l = 0; l + 1 < mlp.layer_count(); ++l) {
    const Mlp single({mlp.layer_sizes()[l], mlp.layer_sizes()[l + 1]}, grad::Activation::linear,
                     {mlp.parameters()[2 * l], mlp.parameters()[2 * l + 1]});
    h = single.forward(h);
    for (double& v : h.values()) {
      if (std::abs(v) < margin) return false;
      v = std::max(v, 0.0);
    }
  }
  return true;
}

Array uniform_array(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Array a({rows, cols});
  for (double& v : a.values()) v = rng.uniform(lo, hi);
  return a;
}

Outcome gradient_fidelity() {
  constexpr double tol = 1e-5;
  Rng rng(101);
  grad::GradCheckOptions all;
  all.samples = 0;
  double worst = 0.0;
  int failures = 0;
  const grad::Activation outputs[] = {grad::Activation::linear, grad::Activation::tanh, grad::Activation::sigmoid};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> sizes{1 + rng.below(5)};
    const std::size_t depth = 1 + rng.below(3);
    for (std::size_t l = 0; l < depth; ++l) sizes.push_back(2 + rng.below(15));
    sizes.push_back(1 + rng.below(3));
    Mlp net(sizes, outputs[rng.below(3)], rng);
    Array x = uniform_array(3, sizes.front(), rng, -1.0, 1.0);
    while (!kink_free(net, x, 1e-3)) x = uniform_array(3, sizes.front(), rng, -1.0, 1.0);
    const auto report = grad::grad_check(
        net, x, [](Tape& t, Var out) { return t.mean(t.square(out)); }, tol, all, rng);
    worst = std::max(worst, report.max_relative_error);
    failures += !report.passed;
  }

  // penalty terms as functions of F, and through a diffusion F into the actions
  const PenaltyConfig cfg{2.5, 20.0, 0.7};
  std::vector<Array> f{uniform_array(16, 1, rng, -1.0, 3.0)};
  const auto osc_report = grad::grad_check(
      f, [&](Tape& t, std::span<const Var> p) { return t.mean(record_osc_penalty(t, p[0], cfg)); }, tol, all, rng);
  const auto spot_report = grad::grad_check(
      f, [&](Tape& t, std::span<const Var> p) { return t.mean(record_spot_penalty(t, p[0], cfg.lambda)); }, tol, all,
      rng);
  double scalar_worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double x = -2.0 + 6.0 * i / 400.0, h = 1e-6;
    const double fd = (osc_penalty(x + h, cfg) - osc_penalty(x - h, cfg)) / (2.0 * h);
    scalar_worst = std::max(scalar_worst, grad::relative_error(osc_penalty_derivative(x, cfg), fd, 1e-4));
  }

  Rng init(102);
  const diffusion::NoisePredictor predictor(1, 2, {16, 16}, 8, init);
  const auto schedule = diffusion::make_schedule(5, 1e-3, 0.2);
  const Array states = uniform_array(6, 1, rng, -1.0, 1.0);
  std::vector<Array> actions{uniform_array(6, 2, rng, -1.0, 1.0)};
  const diffusion::NllOptions nll{diffusion::TimestepMode::sampled, 2, 3};
  const auto chain_report = grad::grad_check(
      actions,
      [&](Tape& t, std::span<const Var> p) {
        Rng draws(7);  // same noise on every evaluation
        return t.mean(record_osc_penalty(t, diffusion::record_nll(t, predictor, schedule, p[0], states, nll, draws), cfg));
      },
      tol, all, rng);

  worst = std::max({worst, osc_report.max_relative_error, spot_report.max_relative_error, scalar_worst,
                    chain_report.max_relative_error});
  const bool pass = failures == 0 && osc_report.passed && spot_report.passed && scalar_worst < tol && chain_report.passed;
  return {pass, fmt("50 MLPs (%d failing) + osc/spot/chain checks, max relative error %.2e (tol 1e-5)", failures, worst)};
}

// ---------------------------------------------------------------- 2

Outcome density_discrimination() {
  constexpr double sigma = 0.1;
  auto modes = [](double s) {
    return std::array<std::array<double, 2>, 2>{{{0.5, 0.3 * s}, {-0.5, -0.3 * s}}};
  };
  Rng rng(201);
  const std::size_t n = 10000;
  Array states({n, 1}), actions({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(-1.0, 1.0);
    const auto m = modes(s)[rng.below(2)];
    states[i] = s;
    actions(i, 0) = m[0] + sigma * rng.normal();
    actions(i, 1) = m[1] + sigma * rng.normal();
  }
  const auto schedule = diffusion::make_schedule(20, 1e-4, 0.2);
  Rng init(202);
  diffusion::NoisePredictor predictor(1, 2, {128, 128}, 16, init);
  grad::AdamState adam(predictor.net().parameters(), {1e-3});
  std::vector<std::size_t> rows(256);
  for (int step = 0; step < 5000; ++step) {
    Array bs({256, 1}), ba({256, 2});
    for (std::size_t r = 0; r < 256; ++r) {
      const std::size_t k = rng.below(n);
      bs[r] = states[k];
      ba(r, 0) = actions(k, 0);
      ba(r, 1) = actions(k, 1);
    }
    diffusion::diffusion_train_step(predictor, adam, schedule, bs, ba, rng);
  }

  std::vector<double> f_all, nll_all, in_scores, out_scores;
  for (double s : {-0.5, 0.0, 0.5}) {
    Array ps({41 * 41, 1}), pa({41 * 41, 2});
    for (int i = 0; i < 41; ++i) {
      for (int j = 0; j < 41; ++j) {
        const std::size_t r = static_cast<std::size_t>(i * 41 + j);
        ps[r] = s;
        pa(r, 0) = -1.0 + 2.0 * i / 40.0;
        pa(r, 1) = -1.0 + 2.0 * j / 40.0;
      }
    }
    Rng draws(203);
    const auto f = diffusion::estimate_nll_batch(predictor, schedule, ps, pa,
                                                 {diffusion::TimestepMode::all, 8, 0}, draws);
    const auto m = modes(s);
    for (std::size_t r = 0; r < f.size(); ++r) {
      double density = 0.0, nearest = 1e300;
      for (const auto& mu : m) {
        const double d2 = std::pow(pa(r, 0) - mu[0], 2) + std::pow(pa(r, 1) - mu[1], 2);
        density += 0.5 * std::exp(-0.5 * d2 / (sigma * sigma)) / (2.0 * std::numbers::pi * sigma * sigma);
        nearest = std::min(nearest, std::sqrt(d2));
      }
      f_all.push_back(f[r]);
      nll_all.push_back(-std::log(std::max(density, 1e-300)));
      if (nearest <= 2.0 * sigma) in_scores.push_back(-f[r]);
      if (nearest > 3.0 * sigma) out_scores.push_back(-f[r]);
    }
  }
  const double rho = stats::spearman(f_all, nll_all);
  const double auc = stats::roc_auc(in_scores, out_scores);
  return {rho >= 0.8 && auc >= 0.95,
          fmt("Spearman(F, true NLL) = %.3f (>= 0.8), AUC = %.4f (>= 0.95) over 3 x 41 x 41 probes", rho, auc)};
}

// ---------------------------------------------------------------- 3

Outcome penalty_shape() {
  const PenaltyConfig cfg{1.7, 1e4, 2.0};
  double worst = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double f = -6.0 + 14.0 * i / 200000.0;
    if (std::abs(f - cfg.eps_breve) < 0.01) continue;
    worst = std::max(worst, std::abs(osc_penalty(f, cfg) - indicator_penalty(f, cfg)));
  }
  const double f1 = 0.5, f2 = 1.25;  // both inside the support (F < eps_breve)
  const double spot_gap = spot_penalty(f1, cfg.lambda) - spot_penalty(f2, cfg.lambda);
  const double osc_gap = std::abs(osc_penalty(f1, cfg) - osc_penalty(f2, cfg));
  const bool pass = worst <= cfg.lambda * 1e-4 && spot_gap == cfg.lambda * (f2 - f1) && osc_gap <= cfg.lambda * 1e-4;
  return {pass, fmt("max |osc - indicator| = %.2e (<= %.2e); in-support spot gap %.6f = lambda*dF %.6f; osc gap %.1e",
                    worst, cfg.lambda * 1e-4, spot_gap, cfg.lambda * (f2 - f1), osc_gap)};
}

// ---------------------------------------------------------------- 4

Outcome tabular_reproduction() {
  tabular::DemoConfig cfg;
  const tabular::DemoResult r = tabular::run_tabular_demo(cfg);
  const tabular::PolicyScore* brac = nullptr;
  const tabular::PolicyScore* spot = nullptr;
  const tabular::PolicyScore* osc = nullptr;
  for (const auto& run : r.runs) {
    if (run.objective == tabular::Objective::brac) brac = &run.score;
    if (run.objective == tabular::Objective::spot) spot = &run.score;
    if (run.objective == tabular::Objective::osc) osc = &run.score;
  }
  if (!brac || !spot || !osc) return {false, "demo did not produce all three objectives"};
  const bool pass = osc->success_rate >= 0.95 && osc->on_path_optimal >= 0.9 &&
                    spot->success_rate < osc->success_rate && brac->success_rate < osc->success_rate &&
                    r.brac_rank_correlation >= 0.7 && r.oracle_score.success_rate == 1.0;
  return {pass, fmt("osc success %.2f on-path %.2f; spot %.2f; brac %.2f; brac rank corr %.3f; oracle %.2f",
                    osc->success_rate, osc->on_path_optimal, spot->success_rate, brac->success_rate,
                    r.brac_rank_correlation, r.oracle_score.success_rate)};
}

// ---------------------------------------------------------------- 5 and 8

harness::ExperimentConfig point_mass_config() {
  harness::ExperimentConfig c;
  c.name = "point-mass";
  c.env = {{"kind", "point-mass"}};
  c.data.transitions = 20000;
  c.diffusion.hidden = {128, 128};
  c.diffusion.train_steps = 10000;
  c.diffusion.nll = {diffusion::TimestepMode::sampled, 1, 8};
  c.agent.td3.hidden = {64, 64};
  c.agent.train_steps = 5000;
  c.eval = {10, 5};
  return c;
}

const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};

harness::RunOptions quiet_runs() {
  harness::RunOptions o;
  o.log = [](const std::string& msg) {
    if (msg.find("eval mean return") != std::string::npos || msg.find("failed") != std::string::npos) progress(msg);
  };
  return o;
}

struct Reference {
  double behavior = 0.0;
  double oracle = 0.0;
};

Reference references(const std::vector<harness::RunRecord>& records) {
  Reference ref;
  double n = 0.0;
  for (const auto& r : records) {
    if (!r.behavior_eval || !r.oracle_eval) continue;
    ref.behavior += r.behavior_eval->mean_return;
    ref.oracle += r.oracle_eval->mean_return;
    n += 1.0;
  }
  ref.behavior /= n;
  ref.oracle /= n;
  return ref;
}

bool all_ok(const std::vector<harness::RunRecord>& records, std::string& why) {
  for (const auto& r : records) {
    if (!r.ok()) {
      why = r.objective + " seed " + std::to_string(r.seed) + " failed in " + r.failed_stage + ": " + r.error;
      return false;
    }
  }
  return true;
}

Outcome ablation_ordering() {
  using harness::Objective;
  const std::vector<Objective> arms{Objective::osc, Objective::spot_diffusion, Objective::osc_kernel,
                                    Objective::spot_kernel};
  const auto records = harness::run_ablation(point_mass_config(), arms, kSeeds, g_work / "point-mass", quiet_runs());
  std::string why;
  if (!all_ok(records, why)) return {false, why};
  harness::emit_reports(records, g_work / "point-mass" / "reports");
  auto arm = [&](Objective o) {
    std::vector<harness::RunRecord> sel;
    for (const auto& r : records)
      if (r.objective == harness::objective_name(o)) sel.push_back(r);
    return harness::mean_final_return(sel);
  };
  const Reference ref = references(records);
  const double osc = arm(Objective::osc), spot = arm(Objective::spot_diffusion);
  const double osc_k = arm(Objective::osc_kernel), spot_k = arm(Objective::spot_kernel);
  const double gap_fraction = (osc - ref.behavior) / (ref.oracle - ref.behavior);
  const bool pass = osc >= spot && osc >= osc_k && gap_fraction >= 0.2;
  return {pass, fmt("mean return osc+diff %.3f, spot+diff %.3f, osc+kernel %.3f, spot+kernel %.3f; behavior %.3f, "
                    "oracle %.3f; osc closes %.1f%% of the gap (>= 20%%)",
                    osc, spot, osc_k, spot_k, ref.behavior, ref.oracle, 100.0 * gap_fraction)};
}

Outcome hyperparameter_robustness() {
  const fs::path out = g_work / "point-mass";
  const auto base = point_mass_config();
  const auto points = harness::run_sweep(base, "/agent/td3/penalty/lambda", {1.0, 2.0, 5.0}, kSeeds, out, quiet_runs());
  const auto narrow = harness::run_sweep(base, "/agent/eps_quantile", {0.5, 0.98}, kSeeds, out, quiet_runs());
  std::vector<harness::RunRecord> all;
  for (const auto& p : points) all.insert(all.end(), p.records.begin(), p.records.end());
  for (const auto& p : narrow) all.insert(all.end(), p.records.begin(), p.records.end());
  std::string why;
  if (!all_ok(all, why)) return {false, why};
  harness::emit_sweep_report("/agent/td3/penalty/lambda", points, out / "reports");
  harness::emit_sweep_report("/agent/eps_quantile", narrow, out / "reports");

  const Reference ref = references(all);
  const double gap = ref.oracle - ref.behavior;
  std::vector<double> by_lambda;
  for (const auto& p : points) by_lambda.push_back(harness::mean_final_return(p.records));
  const double spread = *std::max_element(by_lambda.begin(), by_lambda.end()) -
                        *std::min_element(by_lambda.begin(), by_lambda.end());
  const double q50 = harness::mean_final_return(narrow[0].records);
  const double q98 = harness::mean_final_return(narrow[1].records);
  const bool pass = spread < 0.15 * gap && q50 < q98;
  return {pass, fmt("returns at lambda 1/2/5: %.3f / %.3f / %.3f, spread %.1f%% of gap (< 15%%); "
                    "eps quantile 0.5 -> %.3f vs 0.98 -> %.3f",
                    by_lambda[0], by_lambda[1], by_lambda[2], 100.0 * spread / gap, q50, q98)};
}

// ---------------------------------------------------------------- 6

// Plain TD3 written out step by step, independent of the agent module.
struct PlainTd3 {
  agent::AgentParams net;
  agent::TD3Config cfg;

  static Array join(const Array& s, const Array& a) {
    Array out({s.rows(), s.cols() + a.cols()});
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t c = 0; c < s.cols(); ++c) out(r, c) = s(r, c);
      for (std::size_t c = 0; c < a.cols(); ++c) out(r, s.cols() + c) = a(r, c);
    }
    return out;
  }

  void step(int i, const data::Batch& b, Rng& noise) {
    Array next = net.actor_target.forward(b.next_states);
    for (std::size_t k = 0; k < next.size(); ++k) {
      const double eps = std::clamp(cfg.target_noise * noise.normal(), -cfg.target_noise_clip, cfg.target_noise_clip);
      next[k] = std::clamp(next[k] + eps, -1.0, 1.0);
    }
    const Array q1n = net.critic1_target.forward(join(b.next_states, next));
    const Array q2n = net.critic2_target.forward(join(b.next_states, next));
    Array y({b.rewards.rows(), 1});
    for (std::size_t k = 0; k < y.size(); ++k)
      y[k] = b.rewards[k] + cfg.gamma * (1.0 - b.dones[k]) * std::min(q1n[k], q2n[k]);
    {
      Tape t;
      const Var in = t.constant(join(b.states, b.actions));
      const auto c1 = net.critic1.record(t, in, true);
      const auto c2 = net.critic2.record(t, in, true);
      const Var target = t.constant(y);
      t.backward(t.add(t.mean(t.square(t.sub(c1.output, target))), t.mean(t.square(t.sub(c2.output, target)))));
      grad::adam_step(net.critic1.parameters(), c1.gradients(t), net.critic1_opt);
      grad::adam_step(net.critic2.parameters(), c2.gradients(t), net.critic2_opt);
    }
    if (i % cfg.policy_delay != 0) return;
    {
      Tape t;
      const Var s = t.constant(b.states);
      const auto a = net.actor.record(t, s, true);
      const Var parts[] = {s, a.output};
      const auto q = net.critic1.record(t, t.concat(parts), false);
      t.backward(t.scale(t.mean(q.output), -1.0));
      grad::adam_step(net.actor.parameters(), a.gradients(t), net.actor_opt);
    }
    auto track = [&](Mlp& target, const Mlp& online) {
      auto tp = target.parameters();
      auto op = online.parameters();
      for (std::size_t p = 0; p < tp.size(); ++p)
        for (std::size_t k = 0; k < tp[p].size(); ++k) tp[p][k] = cfg.tau * op[p][k] + (1.0 - cfg.tau) * tp[p][k];
    };
    track(net.actor_target, net.actor);
    track(net.critic1_target, net.critic1);
    track(net.critic2_target, net.critic2);
  }
};

bool bitwise_equal(const Mlp& a, const Mlp& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].size() != pb[i].size()) return false;
    for (std::size_t k = 0; k < pa[i].size(); ++k)
      if (std::bit_cast<std::uint64_t>(pa[i][k]) != std::bit_cast<std::uint64_t>(pb[i][k])) return false;
  }
  return true;
}

Outcome lambda_zero_reduction() {
  auto env = envs::make_environment({{"kind", "point-mass"}});
  Rng data_rng(601);
  const auto raw = data::collect_dataset(*env, envs::make_behavior(env->spec()), 5000, data_rng);
  const auto norm = data::normalize_actions(raw);

  agent::TD3Config cfg;
  cfg.constraint = agent::Constraint::osc;
  cfg.penalty.lambda = 0.0;
  Rng init(602);
  agent::AgentParams osc_agent = agent::make_agent(2, 2, cfg, init);
  PlainTd3 plain{osc_agent, cfg};

  // a real diffusion density is supplied; with lambda = 0 it must not matter
  Rng pred_init(603);
  const diffusion::NoisePredictor predictor(2, 2, {32}, 8, pred_init);
  const auto schedule = diffusion::make_schedule(10, 1e-4, 0.2);
  const diffusion::DiffusionDensity density(predictor, schedule, {diffusion::TimestepMode::sampled, 1, 4});

  const Rng root(604);
  agent::TrainerStreams streams(root);
  agent::train_offline(osc_agent, norm.data, &density, cfg, 1000, streams);

  agent::TrainerStreams ref_streams(root);
  for (int i = 1; i <= 1000; ++i) {
    const data::Batch b = data::sample_batch(norm.data, cfg.batch_size, ref_streams.batch);
    plain.step(i, b, ref_streams.target_noise);
  }
  const bool pass = bitwise_equal(osc_agent.actor, plain.net.actor) &&
                    bitwise_equal(osc_agent.critic1, plain.net.critic1) &&
                    bitwise_equal(osc_agent.critic2, plain.net.critic2) &&
                    bitwise_equal(osc_agent.actor_target, plain.net.actor_target) &&
                    bitwise_equal(osc_agent.critic1_target, plain.net.critic1_target) &&
                    bitwise_equal(osc_agent.critic2_target, plain.net.critic2_target);
  return {pass, pass ? "all six networks bitwise identical after 1000 steps"
                     : "parameter trajectories diverged from reference TD3"};
}

// ---------------------------------------------------------------- 7

harness::ExperimentConfig grid_finetune_config() {
  harness::ExperimentConfig c;
  c.name = "grid-finetune";
  c.env = {{"kind", "gridworld-continuous"}};
  c.data.transitions = 20000;
  c.diffusion.hidden = {64, 64};
  c.diffusion.train_steps = 3000;
  c.agent.td3.hidden = {64, 64};
  c.agent.train_steps = 5000;
  c.eval = {20, 5};
  c.finetune.enabled = true;
  c.finetune.options.online_steps = 5000;
  c.finetune.options.schedule = {1.0, 0.0, 5000, agent::DecayMode::linear};
  return c;
}

Outcome finetune_improvement() {
  std::vector<harness::RunRecord> records;
  for (std::uint64_t seed : {0, 1, 2}) {
    auto cfg = grid_finetune_config();
    cfg.seed = seed;
    records.push_back(harness::run_experiment(cfg, g_work / "grid", quiet_runs()));
  }
  std::string why;
  if (!all_ok(records, why)) return {false, why};
  harness::emit_reports(records, g_work / "grid" / "reports");
  double offline = 0.0, tuned = 0.0;
  bool monotone = true;
  for (const auto& r : records) {
    offline += r.offline_eval->success_rate / records.size();
    tuned += r.finetune_eval->success_rate / records.size();
    for (std::size_t i = 1; i < r.finetune_metrics.size(); ++i)
      monotone = monotone && r.finetune_metrics[i].lambda <= r.finetune_metrics[i - 1].lambda;
    monotone = monotone && !r.finetune_metrics.empty() && r.finetune_metrics.front().lambda == 1.0;
  }
  return {tuned >= offline && monotone,
          fmt("success rate offline %.3f -> fine-tuned %.3f over 3 seeds; lambda monotone non-increasing: %s", offline,
              tuned, monotone ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::temp_directory_path() / "osc_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::string list = argv[++i];
      for (std::size_t p = 0; p < list.size();) {
        const std::size_t q = std::min(list.find(',', p), list.size());
        only.insert(std::stoi(list.substr(p, q - p)));
        p = q + 1;
      }
    } else if (arg == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N[,N...]] [--work DIR]\n");
      return 2;
    }
  }
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria{
      {1, "gradient fidelity", 60, gradient_fidelity},
      {2, "diffusion density discrimination", 300, density_discrimination},
      {3, "penalty shape", 60, penalty_shape},
      {4, "gridworld conservatism demo", 600, tabular_reproduction},
      {5, "ablation ordering on point-mass", 1800, ablation_ordering},
      {6, "lambda = 0 reduces to TD3", 600, lambda_zero_reduction},
      {7, "online fine-tuning", 900, finetune_improvement},
      {8, "hyperparameter robustness", 1800, hyperparameter_robustness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::fprintf(stderr, "running criterion %d: %s\n", c.id, c.name);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s; %.1f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.budget_seconds, in_time ? "" : " OVER BUDGET");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
