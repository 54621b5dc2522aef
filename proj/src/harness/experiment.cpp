#include "osc/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <memory>
#include <mutex>
#include <thread>

#include "osc/data/dataset.hpp"
#include "osc/diffusion/model.hpp"
#include "osc/errors.hpp"
#include "osc/harness/reports.hpp"
#include "osc/io.hpp"
#include "osc/kernel_density.hpp"

namespace osc::harness {

namespace fs = std::filesystem;

bool RunRecord::completed(const std::string& stage) const {
  return std::find(completed_stages.begin(), completed_stages.end(), stage) != completed_stages.end();
}

const EvalSummary& RunRecord::final_eval() const {
  if (finetune_eval) return *finetune_eval;
  if (offline_eval) return *offline_eval;
  throw ContractError("run record has no evaluation");
}

namespace {

void put_optional(nlohmann::json& j, const char* key, const std::optional<EvalSummary>& s) {
  j[key] = s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

std::optional<EvalSummary> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<EvalSummary>();
}

}  // namespace

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = {{"config", r.config},
       {"seed", r.seed},
       {"config_hash", r.config_hash},
       {"objective", r.objective},
       {"completed_stages", r.completed_stages},
       {"resumed_stages", r.resumed_stages},
       {"failed_stage", r.failed_stage},
       {"error", r.error},
       {"eps_breve", r.eps_breve},
       {"wall_seconds", r.wall_seconds},
       {"checksums", r.checksums}};
  put_optional(j, "offline_eval", r.offline_eval);
  put_optional(j, "finetune_eval", r.finetune_eval);
  put_optional(j, "behavior_eval", r.behavior_eval);
  put_optional(j, "oracle_eval", r.oracle_eval);
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  r.config = j.at("config");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.objective = j.at("objective").get<std::string>();
  r.completed_stages = j.at("completed_stages").get<std::vector<std::string>>();
  r.resumed_stages = j.value("resumed_stages", std::vector<std::string>{});
  r.failed_stage = j.value("failed_stage", "");
  r.error = j.value("error", "");
  r.eps_breve = j.value("eps_breve", 0.0);
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.checksums = j.value("checksums", std::map<std::string, std::string>{});
  r.offline_eval = get_optional(j, "offline_eval");
  r.finetune_eval = get_optional(j, "finetune_eval");
  r.behavior_eval = get_optional(j, "behavior_eval");
  r.oracle_eval = get_optional(j, "oracle_eval");
}

namespace {

std::string file_digest(const fs::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(io::read_text(path))));
  return buf;
}

// One stage's artifact directory; done.json marks it complete.
struct StageDir {
  fs::path root;
  fs::path dir;

  bool done() const { return fs::exists(dir / "done.json"); }
  nlohmann::json info() const { return nlohmann::json::parse(io::read_text(dir / "done.json")); }

  void begin() const {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  void finish(nlohmann::json info) const {
    std::map<std::string, std::string> sums;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().filename() != "done.json")
        sums[fs::relative(e.path(), root).generic_string()] = file_digest(e.path());
    }
    info["checksums"] = sums;
    io::write_text(dir / "done.json", info.dump(2) + "\n");
  }

  void collect(std::map<std::string, std::string>& out) const {
    const auto sums = info().value("checksums", std::map<std::string, std::string>{});
    out.insert(sums.begin(), sums.end());
  }
};

void write_losses(const fs::path& path, const std::vector<std::pair<int, double>>& losses) {
  std::string text = "step,loss\n";
  char buf[64];
  for (const auto& [step, loss] : losses) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", step, loss);
    text += buf;
  }
  io::write_text(path, text);
}

std::vector<std::pair<int, double>> read_losses(const fs::path& path) {
  std::vector<std::pair<int, double>> out;
  const std::string text = io::read_text(path);
  std::size_t pos = text.find('\n');
  while (pos != std::string::npos && pos + 1 < text.size()) {
    const std::size_t end = text.find('\n', pos + 1);
    const std::string line = text.substr(pos + 1, end - pos - 1);
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path.string() + ": malformed loss row");
    out.emplace_back(std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    pos = end;
  }
  return out;
}

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& cfg, fs::path out, const RunOptions& options)
      : cfg_(cfg), out_(std::move(out)), options_(options), root_(cfg.seed) {
    const nlohmann::json j = cfg;
    const std::string family = uses_diffusion(cfg.objective) ? "diffusion" : uses_kernel(cfg.objective) ? "kernel" : "none";
    keys_["data"] = hash_json({{"env", j["env"]}, {"data", j["data"]}});
    nlohmann::json density = {{"data", keys_["data"]}, {"family", family}};
    if (family == "diffusion") density["diffusion"] = j["diffusion"];
    if (family == "kernel") density["kernel"] = j["kernel"];
    keys_["density"] = hash_json(density);
    keys_["agent"] = hash_json({{"density", keys_["density"]}, {"agent", j["agent"]}, {"objective", j["objective"]}});
    keys_["eval"] = hash_json({{"agent", keys_["agent"]}, {"eval", j["eval"]}});
    keys_["finetune"] = hash_json({{"agent", keys_["agent"]}, {"finetune", j["finetune"]}, {"eval", j["eval"]}});

    record_.config = j;
    record_.seed = cfg.seed;
    record_.config_hash = config_hash(cfg);
    record_.objective = objective_name(cfg.objective);
  }

  RunRecord run() {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_);
    const std::vector<std::pair<std::string, void (Pipeline::*)(const StageDir&, bool)>> stages{
        {"data", &Pipeline::data_stage},
        {"density", &Pipeline::density_stage},
        {"agent", &Pipeline::agent_stage},
        {"eval", &Pipeline::eval_stage},
        {"finetune", &Pipeline::finetune_stage}};
    for (const auto& [name, fn] : stages) {
      if (name == "finetune" && !cfg_.finetune.enabled) break;
      const StageDir stage = dir(name);
      const bool reuse = options_.resume && stage.done();
      try {
        log((reuse ? "resuming stage " : "running stage ") + name);
        if (!reuse) stage.begin();
        (this->*fn)(stage, reuse);
        stage.collect(record_.checksums);
      } catch (const std::exception& e) {
        record_.failed_stage = name;
        record_.error = e.what();
        log("stage " + name + " failed: " + e.what());
        break;
      }
      record_.completed_stages.push_back(name);
      if (reuse) record_.resumed_stages.push_back(name);
      if (name == options_.stop_after) break;
    }
    record_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const fs::path path = out_ / ("run-" + record_.config_hash + "-s" + std::to_string(cfg_.seed) + ".json");
    io::write_text(path, nlohmann::json(record_).dump(2) + "\n");
    return std::move(record_);
  }

 private:
  StageDir dir(const std::string& stage) const {
    return {out_, out_ / "stages" / (stage + "-" + keys_.at(stage) + "-s" + std::to_string(cfg_.seed))};
  }

  void log(const std::string& msg) const {
    if (options_.log) options_.log("[" + cfg_.name + " " + record_.objective + " s" + std::to_string(cfg_.seed) + "] " + msg);
  }

  void data_stage(const StageDir& stage, bool reuse) {
    const fs::path file = stage.dir / "dataset.bin";
    data::Dataset raw;
    if (reuse) {
      raw = data::load_dataset(file);
    } else {
      if (!cfg_.data.path.empty()) {
        raw = data::load_dataset(cfg_.data.path);
      } else {
        auto env = envs::make_environment(cfg_.env);
        Rng rng = root_.substream("data");
        raw = data::collect_dataset(*env, envs::make_behavior(cfg_.env), cfg_.data.transitions, rng);
      }
      data::save_dataset(file, raw);
      stage.finish({{"transitions", raw.size()}});
    }
    if (raw.discrete) throw ContractError("the agent pipeline needs continuous actions");
    norm_ = data::normalize_actions(raw);
  }

  void density_stage(const StageDir& stage, bool reuse) {
    if (uses_diffusion(cfg_.objective)) {
      const fs::path file = stage.dir / "predictor.ckpt";
      if (reuse) {
        schedule_ = std::make_unique<diffusion::VarianceSchedule>(std::vector<double>{0.1});
        predictor_ = std::make_unique<diffusion::NoisePredictor>(diffusion::load_predictor(file, schedule_.get()));
        record_.diffusion_losses = read_losses(stage.dir / "diffusion_loss.csv");
      } else {
        const auto& d = cfg_.diffusion;
        schedule_ = std::make_unique<diffusion::VarianceSchedule>(
            diffusion::make_schedule(d.steps, d.beta_min, d.beta_max));
        Rng init = root_.substream("diffusion-init");
        predictor_ = std::make_unique<diffusion::NoisePredictor>(norm_.data.state_dim, norm_.data.action_dim, d.hidden,
                                                                 d.embed_dim, init);
        grad::AdamState adam(predictor_->net().parameters(), {d.lr});
        Rng rng = root_.substream("diffusion-train");
        const int every = std::max(1, d.train_steps / 100);
        for (int step = 1; step <= d.train_steps; ++step) {
          const data::Batch b = data::sample_batch(norm_.data, d.batch_size, rng);
          const double loss =
              diffusion::diffusion_train_step(*predictor_, adam, *schedule_, b.states, b.actions, rng);
          if (step % every == 0 || step == d.train_steps) record_.diffusion_losses.emplace_back(step, loss);
          if (step % std::max(1, d.train_steps / 10) == 0)
            log("diffusion step " + std::to_string(step) + " loss " + std::to_string(loss));
        }
        diffusion::save_predictor(file, *predictor_, *schedule_);
        write_losses(stage.dir / "diffusion_loss.csv", record_.diffusion_losses);
        stage.finish({{"family", "diffusion"}});
      }
      density_ = std::make_unique<diffusion::DiffusionDensity>(*predictor_, *schedule_, cfg_.diffusion.nll);
    } else if (uses_kernel(cfg_.objective)) {
      Rng rng = root_.substream("kernel");
      auto kde = std::make_unique<KernelDensity>(norm_.data, cfg_.kernel, rng);
      if (!reuse) {
        io::write_text(stage.dir / "kernel.json",
                       nlohmann::json{{"reference_size", kde->reference_size()},
                                      {"state_bandwidths", kde->state_bandwidths()},
                                      {"action_bandwidths", kde->action_bandwidths()}}
                               .dump(2) +
                           "\n");
        stage.finish({{"family", "kernel"}});
      }
      density_ = std::move(kde);
    } else if (!reuse) {
      stage.finish({{"family", "none"}});
    }
  }

  void agent_stage(const StageDir& stage, bool reuse) {
    const fs::path agent_dir = stage.dir / "agent";
    if (reuse) {
      agent_ = agent::load_agent(agent_dir, &td3_);
      record_.offline_metrics = read_metrics_csv(stage.dir / "metrics.csv");
      record_.eps_breve = stage.info().value("eps_breve", 0.0);
      return;
    }
    td3_ = cfg_.td3();
    Rng init = root_.substream("agent-init");
    agent_ = agent::make_agent(norm_.data.state_dim, norm_.data.action_dim, td3_, init);
    if (td3_.penalty_active() && td3_.constraint == agent::Constraint::osc) {
      Rng rng = root_.substream("eps-breve");
      const std::size_t n = std::min(cfg_.agent.eps_sample, norm_.data.size());
      const data::Batch b = data::sample_batch(norm_.data, n, rng);
      td3_.penalty.eps_breve = agent::select_eps_breve(*density_, b.states, b.actions, cfg_.agent.eps_quantile, rng);
      log("eps_breve = " + std::to_string(td3_.penalty.eps_breve));
    }
    record_.eps_breve = td3_.penalty.eps_breve;
    agent::TrainerStreams streams(root_.substream("agent"));
    const int every = std::max(1, cfg_.agent.train_steps / 10);
    agent::train_offline(agent_, norm_.data, density_.get(), td3_, cfg_.agent.train_steps, streams,
                         [&](const agent::StepMetrics& m) {
                           record_.offline_metrics.push_back(m);
                           if (m.step % every == 0)
                             log("agent step " + std::to_string(m.step) + " td " + std::to_string(m.td_loss));
                         });
    agent::save_agent(agent_dir, agent_, td3_);
    write_metrics_csv(stage.dir / "metrics.csv", record_.offline_metrics);
    stage.finish({{"eps_breve", record_.eps_breve}});
  }

  void evaluate(const agent::AgentParams& agent, std::optional<EvalSummary>& slot, bool references) {
    auto env = envs::make_environment(cfg_.env);
    const Rng root = root_.substream("eval");
    slot = eval_policy(agent_policy(agent, norm_.scaler), *env, cfg_.eval.episodes, cfg_.eval.seeds, root);
    if (!references) return;
    record_.behavior_eval =
        eval_policy(envs::make_behavior(cfg_.env), *env, cfg_.eval.episodes, cfg_.eval.seeds, root);
    if (const auto oracle = make_oracle(cfg_.env))
      record_.oracle_eval = eval_policy(*oracle, *env, cfg_.eval.episodes, cfg_.eval.seeds, root);
  }

  void eval_stage(const StageDir& stage, bool reuse) {
    const fs::path file = stage.dir / "eval.json";
    if (reuse) {
      const auto j = nlohmann::json::parse(io::read_text(file));
      record_.offline_eval = get_optional(j, "policy");
      record_.behavior_eval = get_optional(j, "behavior");
      record_.oracle_eval = get_optional(j, "oracle");
      return;
    }
    evaluate(agent_, record_.offline_eval, true);
    nlohmann::json j;
    put_optional(j, "policy", record_.offline_eval);
    put_optional(j, "behavior", record_.behavior_eval);
    put_optional(j, "oracle", record_.oracle_eval);
    io::write_text(file, j.dump(2) + "\n");
    stage.finish({{"mean_return", record_.offline_eval->mean_return}});
    log("eval mean return " + std::to_string(record_.offline_eval->mean_return) + " success " +
        std::to_string(record_.offline_eval->success_rate));
  }

  void finetune_stage(const StageDir& stage, bool reuse) {
    const fs::path file = stage.dir / "eval.json";
    if (reuse) {
      record_.finetune_eval = nlohmann::json::parse(io::read_text(file)).get<EvalSummary>();
      record_.finetune_metrics = read_metrics_csv(stage.dir / "metrics.csv");
      return;
    }
    // always restart from the saved offline agent so resumed and fresh runs agree
    agent::TD3Config td3;
    agent::AgentParams tuned = agent::load_agent(dir("agent").dir / "agent", &td3);
    auto env = envs::make_environment(cfg_.env);
    agent::TrainerStreams streams(root_.substream("finetune"));
    agent::finetune_online(tuned, *env, norm_.data, norm_.scaler, density_.get(), td3, cfg_.finetune.options, streams,
                           [&](const agent::StepMetrics& m) { record_.finetune_metrics.push_back(m); });
    agent::save_agent(stage.dir / "agent", tuned, td3);
    write_metrics_csv(stage.dir / "metrics.csv", record_.finetune_metrics);
    evaluate(tuned, record_.finetune_eval, false);
    io::write_text(file, nlohmann::json(*record_.finetune_eval).dump(2) + "\n");
    stage.finish({{"mean_return", record_.finetune_eval->mean_return}});
    log("fine-tuned mean return " + std::to_string(record_.finetune_eval->mean_return) + " success " +
        std::to_string(record_.finetune_eval->success_rate));
  }

  const ExperimentConfig& cfg_;
  fs::path out_;
  const RunOptions& options_;
  Rng root_;
  std::map<std::string, std::string> keys_;
  RunRecord record_;

  data::NormalizedDataset norm_;
  std::unique_ptr<diffusion::VarianceSchedule> schedule_;
  std::unique_ptr<diffusion::NoisePredictor> predictor_;
  std::unique_ptr<BehaviorDensity> density_;
  agent::TD3Config td3_;
  agent::AgentParams agent_;
};

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(jobs, static_cast<int>(n)); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& config, const fs::path& out, const RunOptions& options) {
  config.validate();
  if (!options.stop_after.empty() &&
      std::find(kStages.begin(), kStages.end(), options.stop_after) == kStages.end()) {
    throw ContractError("unknown stage '" + options.stop_after + "'");
  }
  return Pipeline(config, out, options).run();
}

std::vector<RunRecord> run_ablation(const ExperimentConfig& base, const std::vector<Objective>& objectives,
                                    const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                    RunOptions options, int jobs) {
  require(!objectives.empty() && !seeds.empty(), "ablation needs at least one objective and one seed");
  base.validate();
  options.resume = true;
  std::vector<RunRecord> records(objectives.size() * seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    for (std::size_t o = 0; o < objectives.size(); ++o) {
      ExperimentConfig cfg = base;
      cfg.seed = seeds[s];
      cfg.objective = objectives[o];
      records[o * seeds.size() + s] = run_experiment(cfg, out, options);
    }
  });
  return records;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::string& pointer,
                                  const std::vector<nlohmann::json>& values, const std::vector<std::uint64_t>& seeds,
                                  const fs::path& out, RunOptions options, int jobs) {
  require(!values.empty() && !seeds.empty(), "sweep needs at least one value and one seed");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(with_value(base, pointer, v));
  options.resume = true;
  std::vector<SweepPoint> points(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    points[i].value = values[i];
    points[i].records.resize(seeds.size());
  }
  parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      ExperimentConfig cfg = configs[i];
      cfg.seed = seeds[s];
      points[i].records[s] = run_experiment(cfg, out, options);
    }
  });
  return points;
}

double mean_final_return(const std::vector<RunRecord>& records) {
  require(!records.empty(), "mean_final_return needs at least one record");
  double total = 0.0;
  for (const auto& r : records) total += r.final_eval().mean_return;
  return total / static_cast<double>(records.size());
}

}  // namespace osc::harness
