#include "osc/data/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "osc/errors.hpp"
#include "osc/io.hpp"

namespace osc::data {

namespace {

struct Moments {
  std::vector<double> min, max, mean, std;
};

Moments column_moments(const std::vector<double>& values, std::size_t dim, std::size_t n) {
  Moments m;
  if (n == 0) return m;
  m.min.assign(dim, 0.0);
  m.max.assign(dim, 0.0);
  m.mean.assign(dim, 0.0);
  m.std.assign(dim, 0.0);
  for (std::size_t c = 0; c < dim; ++c) {
    double lo = values[c], hi = values[c], sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = values[r * dim + c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dv = values[r * dim + c] - mean;
      sq += dv * dv;
    }
    m.min[c] = lo;
    m.max[c] = hi;
    m.mean[c] = mean;
    m.std[c] = std::sqrt(sq / n);
  }
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json stats_to_json(const DatasetStats& s) {
  return {{"count", s.count},           {"state_min", s.state_min},   {"state_max", s.state_max},
          {"state_mean", s.state_mean}, {"state_std", s.state_std},   {"action_min", s.action_min},
          {"action_max", s.action_max}, {"action_mean", s.action_mean}, {"action_std", s.action_std}};
}

DatasetStats stats_from_json(const nlohmann::json& j) {
  DatasetStats s;
  s.count = j.at("count").get<std::size_t>();
  j.at("state_min").get_to(s.state_min);
  j.at("state_max").get_to(s.state_max);
  j.at("state_mean").get_to(s.state_mean);
  j.at("state_std").get_to(s.state_std);
  j.at("action_min").get_to(s.action_min);
  j.at("action_max").get_to(s.action_max);
  j.at("action_mean").get_to(s.action_mean);
  j.at("action_std").get_to(s.action_std);
  return s;
}

void Dataset::push(std::span<const double> s, std::span<const double> a, double r, std::span<const double> s2,
                   bool done) {
  if (s.size() != state_dim || s2.size() != state_dim || a.size() != action_dim) {
    throw DimensionError("dataset transition widths do not match (" + std::to_string(state_dim) + ", " +
                         std::to_string(action_dim) + ")");
  }
  if (!std::isfinite(r)) throw NumericError("dataset reward is not finite");
  states.insert(states.end(), s.begin(), s.end());
  actions.insert(actions.end(), a.begin(), a.end());
  rewards.push_back(r);
  next_states.insert(next_states.end(), s2.begin(), s2.end());
  dones.push_back(done ? 1 : 0);
}

DatasetStats compute_stats(const Dataset& d) {
  DatasetStats s;
  s.count = d.size();
  Moments ms = column_moments(d.states, d.state_dim, d.size());
  Moments ma = column_moments(d.actions, d.action_dim, d.size());
  s.state_min = std::move(ms.min);
  s.state_max = std::move(ms.max);
  s.state_mean = std::move(ms.mean);
  s.state_std = std::move(ms.std);
  s.action_min = std::move(ma.min);
  s.action_max = std::move(ma.max);
  s.action_mean = std::move(ma.mean);
  s.action_std = std::move(ma.std);
  return s;
}

Dataset collect_dataset(envs::Environment& env, const envs::BehaviorFn& behavior, std::size_t count, Rng& rng) {
  require(count >= 1, "collect_dataset needs at least one transition");
  Dataset d;
  d.state_dim = env.state_dim();
  d.action_dim = env.action_dim();
  d.discrete = env.discrete();
  d.env = env.spec();
  std::vector<double> state = env.reset(rng);
  int t = 0;
  while (d.size() < count) {
    const std::vector<double> action = behavior(state, rng);
    envs::StepResult step = env.step(action);
    d.push(state, action, step.reward, step.state, step.done);
    ++t;
    if (step.done || t >= env.horizon()) {
      state = env.reset(rng);
      t = 0;
    } else {
      state = std::move(step.state);
    }
  }
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& d) {
  nlohmann::json header = {{"format", "osc-dataset"},   {"format_version", kDatasetVersion},
                           {"count", d.size()},         {"state_dim", d.state_dim},
                           {"action_dim", d.action_dim}, {"discrete", d.discrete},
                           {"env", d.env},              {"stats", stats_to_json(compute_stats(d))}};
  std::vector<char> payload;
  io::append_doubles(payload, d.states.data(), d.states.size());
  io::append_doubles(payload, d.actions.data(), d.actions.size());
  io::append_doubles(payload, d.rewards.data(), d.rewards.size());
  io::append_doubles(payload, d.next_states.data(), d.next_states.size());
  payload.insert(payload.end(), d.dones.begin(), d.dones.end());
  io::write_framed(path, std::move(header), payload);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const io::FramedFile file = io::read_framed(path);
  const auto& h = file.header;
  try {
    if (h.value("format", "") != "osc-dataset") throw FormatError(path.string() + ": not a dataset file");
    if (h.value("format_version", -1) != kDatasetVersion) {
      throw FormatError(path.string() + ": unsupported dataset version");
    }
    Dataset d;
    const auto n = h.at("count").get<std::size_t>();
    d.state_dim = h.at("state_dim").get<std::size_t>();
    d.action_dim = h.at("action_dim").get<std::size_t>();
    d.discrete = h.at("discrete").get<bool>();
    d.env = h.value("env", nlohmann::json::object());
    std::size_t offset = 0;
    d.states = io::take_doubles(file.payload, offset, n * d.state_dim);
    d.actions = io::take_doubles(file.payload, offset, n * d.action_dim);
    d.rewards = io::take_doubles(file.payload, offset, n);
    d.next_states = io::take_doubles(file.payload, offset, n * d.state_dim);
    if (file.payload.size() - offset != n) throw FormatError(path.string() + ": done column has the wrong length");
    d.dones.assign(file.payload.begin() + static_cast<std::ptrdiff_t>(offset), file.payload.end());
    for (auto b : d.dones) {
      if (b > 1) throw FormatError(path.string() + ": done flags must be 0 or 1");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void export_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ostringstream out;
  for (std::size_t c = 0; c < d.state_dim; ++c) out << "s" << c << ",";
  for (std::size_t c = 0; c < d.action_dim; ++c) out << "a" << c << ",";
  out << "reward,";
  for (std::size_t c = 0; c < d.state_dim; ++c) out << "next_s" << c << ",";
  out << "done\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.state(i)) out << format_double(v) << ",";
    for (double v : d.action(i)) out << format_double(v) << ",";
    out << format_double(d.rewards[i]) << ",";
    for (double v : d.next_state(i)) out << format_double(v) << ",";
    out << static_cast<int>(d.dones[i]) << "\n";
  }
  io::write_text(path, out.str());
}

bool ActionScaler::any_zero_range() const {
  for (bool z : zero_range) {
    if (z) return true;
  }
  return false;
}

std::vector<double> ActionScaler::normalize(std::span<const double> a) const {
  if (a.size() != dim()) throw DimensionError("action scaler: width mismatch");
  std::vector<double> x(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    x[i] = zero_range[i] ? 0.0 : 2.0 * (a[i] - low[i]) / (high[i] - low[i]) - 1.0;
  }
  return x;
}

std::vector<double> ActionScaler::denormalize(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("action scaler: width mismatch");
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = zero_range[i] ? low[i] : low[i] + (x[i] + 1.0) * 0.5 * (high[i] - low[i]);
  }
  return a;
}

nlohmann::json scaler_to_json(const ActionScaler& s) {
  return {{"low", s.low}, {"high", s.high}, {"zero_range", s.zero_range}};
}

ActionScaler scaler_from_json(const nlohmann::json& j) {
  ActionScaler s;
  j.at("low").get_to(s.low);
  j.at("high").get_to(s.high);
  j.at("zero_range").get_to(s.zero_range);
  if (s.high.size() != s.low.size() || s.zero_range.size() != s.low.size()) {
    throw FormatError("action scaler: inconsistent widths");
  }
  return s;
}

ActionScaler bounds_scaler(std::size_t dim, double low, double high) {
  require(high > low, "action bounds must satisfy low < high");
  return {std::vector<double>(dim, low), std::vector<double>(dim, high), std::vector<bool>(dim, false)};
}

NormalizedDataset normalize_actions(const Dataset& dataset) {
  require(!dataset.empty(), "normalize_actions needs a nonempty dataset");
  NormalizedDataset out{dataset, compute_stats(dataset), {}};
  ActionScaler& sc = out.scaler;
  sc.low = out.stats.action_min;
  sc.high = out.stats.action_max;
  sc.zero_range.resize(sc.low.size());
  for (std::size_t c = 0; c < sc.low.size(); ++c) sc.zero_range[c] = !(sc.high[c] > sc.low[c]);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::vector<double> x = sc.normalize(dataset.action(i));
    std::copy(x.begin(), x.end(), out.data.actions.begin() + static_cast<std::ptrdiff_t>(i * dataset.action_dim));
  }
  return out;
}

Batch gather(const Dataset& d, std::span<const std::size_t> rows) {
  require(!rows.empty(), "gather needs at least one row");
  const std::size_t b = rows.size();
  Batch out{grad::Array({b, d.state_dim}), grad::Array({b, d.action_dim}), grad::Array({b, 1}),
            grad::Array({b, d.state_dim}), grad::Array({b, 1})};
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t r = rows[i];
    if (r >= d.size()) throw DimensionError("gather: row out of range");
    std::copy_n(d.states.data() + r * d.state_dim, d.state_dim, out.states.data() + i * d.state_dim);
    std::copy_n(d.actions.data() + r * d.action_dim, d.action_dim, out.actions.data() + i * d.action_dim);
    std::copy_n(d.next_states.data() + r * d.state_dim, d.state_dim, out.next_states.data() + i * d.state_dim);
    out.rewards[i] = d.rewards[r];
    out.dones[i] = d.dones[r];
  }
  return out;
}

Batch sample_batch(const Dataset& d, std::size_t size, Rng& rng) {
  require(!d.empty(), "sample_batch needs a nonempty dataset");
  std::vector<std::size_t> rows(size);
  for (auto& r : rows) r = rng.below(d.size());
  return gather(d, rows);
}

grad::Array state_array(const Dataset& d) {
  require(!d.empty(), "state_array needs a nonempty dataset");
  return grad::Array({d.size(), d.state_dim}, d.states);
}

grad::Array action_array(const Dataset& d) {
  require(!d.empty(), "action_array needs a nonempty dataset");
  return grad::Array({d.size(), d.action_dim}, d.actions);
}

}  // namespace osc::data
