#include "osc/harness/config.hpp"

#include <cstdio>
#include <filesystem>

#include "osc/envs/env.hpp"
#include "osc/errors.hpp"
#include "osc/io.hpp"
#include "osc/rng.hpp"

namespace osc::harness {

namespace {

constexpr struct {
  Objective value;
  const char* name;
} kObjectives[] = {{Objective::osc, "osc"},
                   {Objective::spot_diffusion, "spot-diffusion"},
                   {Objective::osc_kernel, "osc-kernel"},
                   {Objective::spot_kernel, "spot-kernel"},
                   {Objective::td3_unconstrained, "td3-unconstrained"}};

template <class T>
T field(const nlohmann::json& j, const char* key, const T& fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

const char* objective_name(Objective o) {
  for (const auto& e : kObjectives)
    if (e.value == o) return e.name;
  return "?";
}

Objective parse_objective(const std::string& name) {
  for (const auto& e : kObjectives)
    if (name == e.name) return e.value;
  throw ContractError("unknown objective '" + name + "'");
}

agent::Constraint objective_constraint(Objective o) {
  switch (o) {
    case Objective::osc:
    case Objective::osc_kernel: return agent::Constraint::osc;
    case Objective::spot_diffusion:
    case Objective::spot_kernel: return agent::Constraint::spot;
    case Objective::td3_unconstrained: return agent::Constraint::none;
  }
  return agent::Constraint::none;
}

bool uses_diffusion(Objective o) { return o == Objective::osc || o == Objective::spot_diffusion; }
bool uses_kernel(Objective o) { return o == Objective::osc_kernel || o == Objective::spot_kernel; }

void ExperimentConfig::validate() const {
  require(!name.empty(), "experiment name must not be empty");
  try {
    envs::make_environment(env);
  } catch (const ContractError&) {
    throw;
  } catch (const std::exception& e) {
    throw ContractError(std::string("invalid env block: ") + e.what());
  }
  if (!data.path.empty()) {
    require(std::filesystem::exists(data.path), "dataset path '" + data.path + "' does not exist");
  } else {
    require(data.transitions >= 2, "data.transitions must be at least 2");
  }
  require(diffusion.steps >= 1, "diffusion.steps must be at least 1");
  require(diffusion.beta_min > 0.0 && diffusion.beta_max < 1.0 && diffusion.beta_min <= diffusion.beta_max,
          "diffusion betas must satisfy 0 < beta_min <= beta_max < 1");
  require(!diffusion.hidden.empty(), "diffusion.hidden must name at least one layer");
  require(diffusion.embed_dim >= 2 && diffusion.embed_dim % 2 == 0, "diffusion.embed_dim must be even and >= 2");
  require(diffusion.train_steps >= 0 && diffusion.batch_size >= 1 && diffusion.lr > 0.0,
          "diffusion training settings out of range");
  require(diffusion.nll.noise_draws >= 1 && diffusion.nll.timestep_samples >= 1,
          "diffusion.nll draws must be at least 1");
  agent.td3.validate();
  require(agent.eps_quantile > 0.0 && agent.eps_quantile < 1.0, "agent.eps_quantile must lie in (0, 1)");
  require(agent.eps_sample >= 1 && agent.train_steps >= 0, "agent sample and step counts out of range");
  require(eval.episodes >= 1, "eval.episodes must be at least 1");
  require(eval.seeds >= 1, "eval.seeds must be at least 1");
  if (finetune.enabled) {
    finetune.options.schedule.validate();
    require(finetune.options.online_steps >= 0, "finetune.online_steps must be >= 0");
  }
}

agent::TD3Config ExperimentConfig::td3() const {
  agent::TD3Config cfg = agent.td3;
  cfg.constraint = objective_constraint(objective);
  if (objective == Objective::td3_unconstrained) cfg.penalty.lambda = 0.0;
  return cfg;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"format_version", ExperimentConfig::kFormatVersion},
       {"name", c.name},
       {"seed", c.seed},
       {"env", c.env},
       {"data", {{"path", c.data.path}, {"transitions", c.data.transitions}}},
       {"diffusion",
        {{"steps", c.diffusion.steps},
         {"beta_min", c.diffusion.beta_min},
         {"beta_max", c.diffusion.beta_max},
         {"hidden", c.diffusion.hidden},
         {"embed_dim", c.diffusion.embed_dim},
         {"train_steps", c.diffusion.train_steps},
         {"batch_size", c.diffusion.batch_size},
         {"lr", c.diffusion.lr},
         {"nll",
          {{"mode", diffusion::timestep_mode_name(c.diffusion.nll.mode)},
           {"noise_draws", c.diffusion.nll.noise_draws},
           {"timestep_samples", c.diffusion.nll.timestep_samples}}}}},
       {"kernel", c.kernel},
       {"agent",
        {{"td3", c.agent.td3},
         {"eps_quantile", c.agent.eps_quantile},
         {"eps_sample", c.agent.eps_sample},
         {"train_steps", c.agent.train_steps}}},
       {"objective", objective_name(c.objective)},
       {"eval", {{"episodes", c.eval.episodes}, {"seeds", c.eval.seeds}}},
       {"finetune", {{"enabled", c.finetune.enabled}, {"options", c.finetune.options}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ContractError("experiment config must be a JSON object");
  static const char* known[] = {"format_version", "name",   "seed",      "env",  "data",    "diffusion",
                                "kernel",         "agent",  "objective", "eval", "finetune"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw ContractError("unknown config key '" + key + "'");
  }
  const int version = j.value("format_version", ExperimentConfig::kFormatVersion);
  if (version != ExperimentConfig::kFormatVersion)
    throw ContractError("unsupported config format_version " + std::to_string(version));
  try {
    const ExperimentConfig d;
    ExperimentConfig out;
    out.name = field(j, "name", d.name);
    out.seed = field(j, "seed", d.seed);
    out.env = field(j, "env", d.env);
    const auto data = field(j, "data", nlohmann::json::object());
    out.data.path = field(data, "path", d.data.path);
    out.data.transitions = field(data, "transitions", d.data.transitions);
    const auto dif = field(j, "diffusion", nlohmann::json::object());
    out.diffusion.steps = field(dif, "steps", d.diffusion.steps);
    out.diffusion.beta_min = field(dif, "beta_min", d.diffusion.beta_min);
    out.diffusion.beta_max = field(dif, "beta_max", d.diffusion.beta_max);
    out.diffusion.hidden = field(dif, "hidden", d.diffusion.hidden);
    out.diffusion.embed_dim = field(dif, "embed_dim", d.diffusion.embed_dim);
    out.diffusion.train_steps = field(dif, "train_steps", d.diffusion.train_steps);
    out.diffusion.batch_size = field(dif, "batch_size", d.diffusion.batch_size);
    out.diffusion.lr = field(dif, "lr", d.diffusion.lr);
    const auto nll = field(dif, "nll", nlohmann::json::object());
    out.diffusion.nll.mode =
        diffusion::parse_timestep_mode(field(nll, "mode", std::string(diffusion::timestep_mode_name(d.diffusion.nll.mode))));
    out.diffusion.nll.noise_draws = field(nll, "noise_draws", d.diffusion.nll.noise_draws);
    out.diffusion.nll.timestep_samples = field(nll, "timestep_samples", d.diffusion.nll.timestep_samples);
    out.kernel = field(j, "kernel", d.kernel);
    const auto ag = field(j, "agent", nlohmann::json::object());
    out.agent.td3 = field(ag, "td3", d.agent.td3);
    out.agent.eps_quantile = field(ag, "eps_quantile", d.agent.eps_quantile);
    out.agent.eps_sample = field(ag, "eps_sample", d.agent.eps_sample);
    out.agent.train_steps = field(ag, "train_steps", d.agent.train_steps);
    out.objective = parse_objective(field(j, "objective", std::string(objective_name(d.objective))));
    const auto ev = field(j, "eval", nlohmann::json::object());
    out.eval.episodes = field(ev, "episodes", d.eval.episodes);
    out.eval.seeds = field(ev, "seeds", d.eval.seeds);
    const auto ft = field(j, "finetune", nlohmann::json::object());
    out.finetune.enabled = field(ft, "enabled", d.finetune.enabled);
    out.finetune.options = field(ft, "options", d.finetune.options);
    out.validate();
    c = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed experiment config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

std::string hash_json(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = c;
  j.erase("seed");
  return hash_json(j);
}

ExperimentConfig with_value(const ExperimentConfig& c, const std::string& pointer, const nlohmann::json& value) {
  nlohmann::json j = c;
  try {
    j[nlohmann::json::json_pointer(pointer)] = value;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError("cannot set '" + pointer + "': " + e.what());
  }
  return j.get<ExperimentConfig>();
}

}  // namespace osc::harness
