#include <cmath>
#include <sstream>

#include "doctest.h"
#include "macn/evaluator.hpp"

using namespace macn;

namespace {

ModelConfig tiny(int side) {
  ModelConfig c;
  c.height = c.width = side;
  c.hidden = 16;
  c.memory = {8, 4, 2};
  c.vi.iterations = 6;
  c.vi.hidden_channels = 10;
  return c;
}

RolloutResult with_ratio(double ratio) {
  RolloutResult r;
  r.success = true;
  r.outcome = Outcome::ReachedGoal;
  r.expert_steps = 10;
  r.steps = static_cast<int>(std::lround(10 * ratio));
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("default step caps") {
  CHECK(default_step_cap(Task::Grid, 16) == 40);
  CHECK(default_step_cap(Task::Grid, 32) == 60);
  CHECK(default_step_cap(Task::Grid, 64) == 80);
  CHECK(default_step_cap(Task::Tunnel, 16, 35) == 70);
  CHECK(default_step_cap(Task::Graph, 0, 0, 9) == 18);
}

TEST_CASE("rollout") {
  SUBCASE("start at the goal: immediate success") {
    Scenario sc;
    sc.grid = GridWorld(8, 8);
    sc.grid.start = sc.grid.goal = {3, 3};
    const RolloutResult r = rollout(Model(tiny(8), 1), sc, 40);
    CHECK(r.success);
    CHECK(r.steps == 0);
    CHECK(r.ratio() == 1.0);
  }
  SUBCASE("untrained models fail on 16x16 worlds") {
    DataConfig d;
    d.level = 3;
    int wins = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Scenario sc = make_scenario(d, s);
      const RolloutResult r = rollout(Model(ModelConfig{}, s), sc, 40);
      CHECK(r.steps <= 40);
      if (r.outcome == Outcome::ReachedGoal) CHECK(r.path.back() == sc.grid.goal);
      wins += r.success;
    }
    CHECK(wins < 10);
  }
  SUBCASE("same model, world and seed give the same result") {
    DataConfig d;
    d.size = 8;
    const Scenario sc = make_scenario(d, 3);
    const Model m(tiny(8), 2);
    const RolloutResult a = rollout(m, sc, 40), b = rollout(m, sc, 40);
    CHECK(a.actions == b.actions);
    CHECK(a.outcome == b.outcome);
  }
}

TEST_CASE("expert replay succeeds at ratio 1") {
  for (Task task : {Task::Grid, Task::Tunnel, Task::Graph}) {
    DataConfig d;
    d.task = task;
    d.level = 3;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Scenario sc = make_scenario(d, s);
      const int expert = static_cast<int>(expert_actions(sc).size());
      const RolloutResult r = expert_replay(sc, default_step_cap(task, d.size, expert, d.nodes));
      CHECK(r.success);
      CHECK(r.ratio() == 1.0);
    }
  }
}

TEST_CASE("compute_metrics") {
  SUBCASE("all optimal") {
    const MetricsReport m = compute_metrics({with_ratio(1.0), with_ratio(1.0)});
    CHECK(m.success == 1.0);
    CHECK(m.astar_ratio == 1.0);
  }
  SUBCASE("no successes give an infinite ratio") {
    RolloutResult fail;
    fail.outcome = Outcome::Collision;
    const MetricsReport m = compute_metrics({fail, fail});
    CHECK(m.success == 0.0);
    CHECK(std::isinf(m.astar_ratio));
    CHECK(to_json(m).find("\"inf\"") != std::string::npos);
  }
  SUBCASE("ratios average over successes only") {
    RolloutResult fail;
    const MetricsReport m = compute_metrics({with_ratio(1.0), with_ratio(1.2), fail, with_ratio(1.4)});
    CHECK(m.astar_ratio == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(m.success == 0.75);
  }
  SUBCASE("empty list rejected") {
    CHECK_THROWS_AS(compute_metrics({}), std::invalid_argument);
  }
}

TEST_CASE("export_activations") {
  DataConfig d;
  d.size = 8;
  d.level = 1;
  const Scenario sc = make_scenario(d, 5);
  const Model m(tiny(8), 4);
  std::ostringstream out;
  export_activations(m, sc, 40, out);
  const auto rows = lines(out.str());
  const RolloutResult r = rollout(m, sc, 40);
  REQUIRE(rows.size() == static_cast<std::size_t>(r.steps) + 1);

  const auto header = split(rows[0]);
  const auto first = split(rows[1]);
  REQUIRE(header.size() == first.size());
  // 4 logits, 8 write, 2x8 read, 8 usage, 16 controller, 49 V crop
  CHECK(header.size() == 4 + 4 + 8 + 16 + 8 + 16 + 49);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h.rfind("write_w_", 0) == 0 || h.rfind("read_w", 0) == 0 || h.rfind("usage_", 0) == 0) {
      CAPTURE(h);
      CHECK(std::stod(first[i]) == 0.0);
    }
  }

  SUBCASE("memoryless variants drop the memory columns") {
    ModelConfig c = tiny(8);
    c.variant = Variant::VinOnly;
    std::ostringstream vin;
    export_activations(Model(c, 4), sc, 40, vin);
    CHECK(vin.str().find("usage_") == std::string::npos);
    CHECK(vin.str().find("ctrl_") == std::string::npos);
  }
}

TEST_CASE("usage_spike_near") {
  std::vector<std::vector<double>> usage(10, std::vector<double>{0.5, 0.5});
  for (std::size_t t = 0; t < 10; ++t) usage[t][0] = 0.01 * static_cast<double>(t);
  CHECK(usage_spike_near(usage, 6) == -1);
  for (std::size_t t = 6; t < 10; ++t) usage[t][1] = 1.0;
  CHECK(usage_spike_near(usage, 6) == 6);
  CHECK(usage_spike_near(usage, 5) == 6);
  CHECK(usage_spike_near(usage, 3) == -1);
}

TEST_CASE("tunnel sweep reports the longest fully solved length") {
  DataConfig d;
  d.task = Task::Tunnel;
  ModelConfig c = tiny(16);
  c.memory.read_heads = 1;
  SweepConfig s;
  s.start_length = 4;
  s.max_length = 8;
  s.worlds = 3;
  const MetricsReport r = tunnel_sweep(Model(c, 1), d, s, 3, 1);
  REQUIRE_FALSE(r.sweep.empty());
  CHECK(r.sweep.front().first == 4);
  if (r.max_generalization_length) CHECK(*r.max_generalization_length >= 4);
  for (std::size_t i = 0; i + 1 < r.sweep.size(); ++i) CHECK(r.sweep[i].second >= s.threshold);
}
