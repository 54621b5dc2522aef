#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "osc/data/dataset.hpp"
#include "osc/envs/grid.hpp"
#include "osc/envs/point_mass.hpp"
#include "osc/errors.hpp"
#include "osc/io.hpp"

using namespace osc;
using namespace osc::envs;
using namespace osc::data;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "osc_test_envs";
  std::filesystem::create_directories(dir);
  return dir / name;
}

double rollout_return(Environment& env, const BehaviorFn& policy, Rng& rng) {
  std::vector<double> s = env.reset(rng);
  double total = 0.0;
  for (int t = 0; t < env.horizon(); ++t) {
    StepResult r = env.step(policy(s, rng));
    total += r.reward;
    if (r.done) break;
    s = r.state;
  }
  return total;
}

}  // namespace

TEST_CASE("default grid is an 8x8 z corridor") {
  const GridSpec g = make_z_grid();
  CHECK(g.width == 8);
  CHECK(g.height == 8);
  CHECK(g.start == Cell{0, 0});
  CHECK(g.goal == Cell{7, 7});
  const auto path = z_path(g);
  CHECK(path.size() == 15);
  CHECK(g.non_terminal_cells().size() == 14);
  CHECK(g.gray.size() == 64 - 15);
  CHECK(moves_to_goal(g, g.start) == 14);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    CHECK(move(path[i], optimal_action(g, path[i])) == path[i + 1]);
  }
}

TEST_CASE("grid dynamics examples") {
  const GridSpec g = make_z_grid();
  const GridStep a = grid_step(g, {0, 0}, GridAction::right);
  CHECK(a.next == Cell{0, 1});
  CHECK(a.reward == 0.0);
  CHECK_FALSE(a.done);
  const GridStep b = grid_step(g, {7, 6}, GridAction::right);
  CHECK(b.next == g.goal);
  CHECK(b.reward == 1.0);
  CHECK(b.done);
  const GridStep c = grid_step(g, {0, 0}, GridAction::down);
  CHECK(g.is_gray(c.next));
  CHECK(c.reward == 0.0);
  CHECK(c.done);
  const GridStep off = grid_step(g, {7, 5}, GridAction::down);
  CHECK_FALSE(g.inside(off.next));
  CHECK(off.done);
  CHECK_THROWS_AS(grid_step(g, g.goal, GridAction::right), ContractError);
  CHECK_THROWS_AS(grid_step(g, {1, 0}, GridAction::right), ContractError);
}

TEST_CASE("grid spec validation and json") {
  GridSpec g = make_z_grid();
  g.goal = g.start;
  CHECK_THROWS_AS(g.validate(), ContractError);
  const GridSpec h = make_z_grid(6, 5);
  const GridSpec back = grid_spec_from_json(grid_spec_to_json(h));
  CHECK(back.width == 6);
  CHECK(back.height == 5);
  CHECK(back.gray == h.gray);
  CHECK(back.goal == h.goal);
}

TEST_CASE("behavior decay profile") {
  const GridSpec g = make_z_grid();
  CHECK(behavior_probability(g, g.start) == doctest::Approx(0.9));
  CHECK(behavior_probability(g, {7, 6}) == doctest::Approx(0.1));
  const auto cells = g.non_terminal_cells();
  for (Cell a : cells) {
    for (Cell b : cells) {
      if (manhattan_to_goal(g, a) < manhattan_to_goal(g, b)) {
        CHECK(behavior_probability(g, a) < behavior_probability(g, b));
      }
    }
  }
}

TEST_CASE("behavior sampling frequencies") {
  GridSpec g = make_z_grid();
  Rng rng(4);
  g.decay.assign(g.cell_count(), 1.0);
  for (int i = 0; i < 200; ++i) CHECK(behavior_policy(g, {3, 3}, rng) == optimal_action(g, {3, 3}));
  g.decay.assign(g.cell_count(), 0.5);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += behavior_policy(g, {3, 3}, rng) == optimal_action(g, {3, 3});
  CHECK(std::abs(hits / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("collecting a single transition") {
  GridEnv env(make_z_grid(), false, true);
  Rng rng(1);
  const Dataset d = collect_dataset(env, grid_behavior(env), 1, rng);
  CHECK(d.size() == 1);
  CHECK(d.state_dim == 2);
  CHECK(d.discrete);
  CHECK_THROWS_AS(collect_dataset(env, grid_behavior(env), 0, rng), ContractError);
}

TEST_CASE("gridworld dataset matches the behavior decay and the termination rules") {
  const GridSpec g = make_z_grid();
  GridEnv env(g, false, true);
  Rng rng(2024);
  const Dataset d = collect_dataset(env, grid_behavior(env), 100000, rng);
  REQUIRE(d.size() == 100000);

  std::map<int, std::pair<int, int>> counts;  // cell -> (visits, optimal)
  int episode_length = 0;
  int longest = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Cell c = env.cell_of(d.state(i));
    const Cell n = env.cell_of(d.next_state(i));
    auto& [visits, optimal] = counts[g.index(c)];
    ++visits;
    optimal += static_cast<GridAction>(std::lround(d.action(i)[0])) == optimal_action(g, c);
    CHECK((d.dones[i] == 1) == g.terminal(n));
    CHECK(d.rewards[i] == (n == g.goal ? 1.0 : 0.0));
    ++episode_length;
    if (d.dones[i]) {
      longest = std::max(longest, episode_length);
      episode_length = 0;
    }
  }
  CHECK(longest <= g.width + g.height);
  CHECK(counts.size() == g.non_terminal_cells().size());
  for (const auto& [cell, vc] : counts) {
    if (vc.first < 500) continue;
    CHECK(std::abs(static_cast<double>(vc.second) / vc.first - behavior_probability(g, g.cell(cell))) < 0.03);
  }
}

TEST_CASE("dataset generation is reproducible") {
  PointMassEnv env({});
  Rng a(9), b(9), c(10);
  const auto behavior = point_mass_behavior(env.settings());
  const Dataset da = collect_dataset(env, behavior, 500, a);
  const Dataset db = collect_dataset(env, behavior, 500, b);
  const Dataset dc = collect_dataset(env, behavior, 500, c);
  CHECK(da == db);
  CHECK_FALSE(da == dc);
}

TEST_CASE("point-mass dynamics and controllers") {
  PointMassSpec spec;
  PointMassEnv env(spec);
  Rng rng(3);
  env.reset(rng);
  const std::vector<double> big{5.0, -5.0};
  const StepResult r = env.step(big);
  CHECK(r.state.size() == 2);
  for (double v : r.state) CHECK(std::abs(v) <= 1.0);
  CHECK_FALSE(r.done);

  // behavior actions stay in the action box
  const auto behavior = point_mass_behavior(spec);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> s{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (double v : behavior(s, rng)) CHECK(std::abs(v) <= spec.max_speed);
  }

  const auto oracle = point_mass_oracle(spec);
  double behavior_return = 0.0, oracle_return = 0.0;
  Rng ra(5), rb(5);
  for (int e = 0; e < 200; ++e) {
    behavior_return += rollout_return(env, behavior, ra);
    oracle_return += rollout_return(env, oracle, rb);
  }
  CHECK(behavior_return < oracle_return);
}

TEST_CASE("gridworld continuous form") {
  GridEnv env(make_z_grid(), true, false);
  Rng rng(1);
  const auto s = env.reset(rng);
  CHECK(s == std::vector<double>{-1.0, -1.0});
  CHECK(env.cell_of(env.features({7, 3})) == Cell{7, 3});
  const std::vector<double> right{0.3};
  const StepResult r = env.step(right);
  CHECK(env.position() == Cell{0, 1});
  CHECK_FALSE(r.done);
  const auto behavior = grid_behavior(env);
  for (int i = 0; i < 500; ++i) {
    const double a = behavior(s, rng)[0];
    CHECK(a >= -1.0);
    CHECK(a <= 1.0);
    CHECK(a != 0.0);
  }
  const auto made = make_environment(env.spec());
  CHECK(made->spec() == env.spec());
  CHECK_FALSE(made->discrete());
  CHECK_THROWS_AS(make_environment({{"kind", "maze"}}), ContractError);
}

TEST_CASE("dataset file round trip") {
  PointMassEnv env({});
  Rng rng(8);
  const Dataset d = collect_dataset(env, point_mass_behavior(env.settings()), 300, rng);
  const auto path = temp_path("pm.osd");
  save_dataset(path, d);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  const io::FramedFile file = io::read_framed(path);
  CHECK(stats_from_json(file.header.at("stats")) == compute_stats(d));

  Dataset empty;
  empty.state_dim = 2;
  empty.action_dim = 2;
  save_dataset(temp_path("empty.osd"), empty);
  const Dataset empty_back = load_dataset(temp_path("empty.osd"));
  CHECK(empty_back.empty());
  CHECK(empty_back.state_dim == 2);
}

TEST_CASE("damaged dataset files are rejected") {
  PointMassEnv env({});
  Rng rng(8);
  const Dataset d = collect_dataset(env, point_mass_behavior(env.settings()), 50, rng);
  const auto path = temp_path("cut.osd");
  save_dataset(path, d);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 9);
  CHECK_THROWS_AS(load_dataset(path), FormatError);

  save_dataset(path, d);
  io::FramedFile file = io::read_framed(path);
  file.header["format_version"] = 99;
  io::write_framed(path, file.header, file.payload);
  CHECK_THROWS_AS(load_dataset(path), FormatError);

  save_dataset(path, d);
  file = io::read_framed(path);
  file.header["count"] = 49;
  io::write_framed(path, file.header, file.payload);
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  CHECK_THROWS_AS(load_dataset(temp_path("missing.osd")), FormatError);
}

TEST_CASE("csv export") {
  GridEnv env(make_z_grid(), false, true);
  Rng rng(1);
  const Dataset d = collect_dataset(env, grid_behavior(env), 25, rng);
  const auto path = temp_path("grid.csv");
  export_csv(path, d);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "s0,s1,a0,reward,next_s0,next_s1,done");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 25);
}

TEST_CASE("action normalization") {
  Dataset d;
  d.state_dim = 1;
  d.action_dim = 2;
  const std::vector<double> s{0.0};
  for (double a : {-1.0, 0.25, 1.0}) {
    const std::vector<double> act{a, 0.7};
    d.push(s, act, 0.0, s, false);
  }
  const NormalizedDataset n = normalize_actions(d);
  CHECK(n.scaler.zero_range == std::vector<bool>{false, true});
  CHECK(n.scaler.any_zero_range());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(std::abs(n.data.action(i)[0] - d.action(i)[0]) < 1e-12);
    CHECK(n.data.action(i)[1] == 0.0);
    const auto back = n.scaler.denormalize(n.data.action(i));
    CHECK(back[1] == 0.7);
  }

  Rng rng(12);
  Dataset r;
  r.state_dim = 1;
  r.action_dim = 3;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> act{rng.uniform(-5, 3), rng.uniform(0.01, 0.02), rng.normal(100, 40)};
    r.push(s, act, 0.0, s, false);
  }
  const NormalizedDataset rn = normalize_actions(r);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (double x : rn.data.action(i)) {
      CHECK(x >= -1.0);
      CHECK(x <= 1.0);
    }
    const auto back = rn.scaler.denormalize(rn.data.action(i));
    for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, std::abs(back[c] - r.action(i)[c]));
  }
  CHECK(worst < 1e-12);
  CHECK(scaler_from_json(scaler_to_json(rn.scaler)) == rn.scaler);
  CHECK_THROWS_AS(normalize_actions(Dataset{}), ContractError);
}

TEST_CASE("minibatch gathering") {
  PointMassEnv env({});
  Rng rng(8);
  const Dataset d = collect_dataset(env, point_mass_behavior(env.settings()), 40, rng);
  const std::vector<std::size_t> rows{3, 0, 39};
  const Batch b = gather(d, rows);
  CHECK(b.states.rows() == 3);
  CHECK(b.states(2, 1) == d.state(39)[1]);
  CHECK(b.actions(0, 0) == d.action(3)[0]);
  CHECK(b.rewards[1] == d.rewards[0]);
  const std::vector<std::size_t> bad{40};
  CHECK_THROWS_AS(gather(d, bad), DimensionError);
  CHECK(sample_batch(d, 16, rng).states.rows() == 16);
}
