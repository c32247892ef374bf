#include <cmath>

#include "doctest.h"
#include "macn/checks.hpp"
#include "macn/vi.hpp"

using namespace macn;

namespace {

ViWeights random_weights(std::uint64_t seed, const VIConfig& c) {
  ParameterSet ps;
  Rng rng(seed);
  return ViWeights::create(ps, "vi.", c, rng);
}

void zero(const Tensor& t) {
  Tensor m = t;
  for (double& v : m.data()) v = 0.0;
}

}  // namespace

TEST_CASE("default iterations per map side") {
  CHECK(default_iterations(16) == 20);
  CHECK(default_iterations(32) == 40);
  CHECK(default_iterations(64) == 60);
  CHECK(default_iterations(24) == 30);
}

TEST_CASE("conv_feature_block") {
  VIConfig c;
  const ViWeights w = random_weights(1, c);
  Tape tape(false);
  SUBCASE("16x16 input gives a 4 x 16 x 16 reward layer") {
    Rng rng(2);
    Tensor obs = checks::random_tensor(rng, {2, 16, 16});
    CHECK(conv_feature_block(tape, obs, w).shape() == Shape{4, 16, 16});
  }
  SUBCASE("zero input and zero biases give zero R") {
    zero(w.hidden_bias);
    zero(w.reward_bias);
    const Tensor r = conv_feature_block(tape, Tensor({2, 6, 6}), w);
    for (double v : r.data()) CHECK(v == 0.0);
  }
  SUBCASE("pure") {
    Rng rng(3);
    Tensor obs = checks::random_tensor(rng, {2, 8, 8});
    Tensor a = conv_feature_block(tape, obs, w), b = conv_feature_block(tape, obs, w);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("wrong channel count is rejected") {
    CHECK_THROWS(conv_feature_block(tape, Tensor({3, 8, 8}), w));
  }
}

TEST_CASE("vi_recurrence") {
  VIConfig c;
  c.hidden_channels = 6;
  const ViWeights w = random_weights(4, c);
  Rng rng(5);
  Tensor r = checks::random_tensor(rng, {4, 5, 7});
  Tape tape(false);
  SUBCASE("zero recurrence weights reach the all-zero fixed point") {
    zero(w.q0_weight);
    zero(w.q0_bias);
    zero(w.q_weight);
    zero(w.q_bias);
    c.iterations = 1;
    const ValueMaps one = vi_recurrence(tape, r, w, c);
    c.iterations = 2;
    const ValueMaps two = vi_recurrence(tape, r, w, c);
    for (std::size_t i = 0; i < one.v.size(); ++i) {
      CHECK(one.v[i] == 0.0);
      CHECK(two.v[i] == one.v[i]);
    }
  }
  SUBCASE("V has shape 1 x H x W and equals max_a Q") {
    for (int k : {1, 3, 7}) {
      c.iterations = k;
      const ValueMaps m = vi_recurrence(tape, r, w, c);
      CHECK(m.v.shape() == Shape{1, 5, 7});
      CHECK(m.q.shape() == Shape{4, 5, 7});
      for (std::size_t i = 0; i < 35; ++i) {
        double best = m.q[i];
        for (std::size_t a = 1; a < 4; ++a) best = std::max(best, m.q[a * 35 + i]);
        CHECK(m.v[i] == best);
      }
    }
  }
  SUBCASE("K = 0 is rejected") {
    c.iterations = 0;
    CHECK_THROWS(vi_recurrence(tape, r, w, c));
  }
}

TEST_CASE("tabular value iteration") {
  SUBCASE("a lone goal cell sums the geometric series") {
    GridWorld world(1, 1);
    world.goal = world.start = {0, 0};
    const double v = tabular_value_iteration(world, 0.9, 50)[0];
    // 10 (1 - 0.9^50)
    CHECK(v == doctest::Approx(9.948462247926798).epsilon(1e-12));
    CHECK(std::abs(v - 10.0) < 0.06);
  }
  SUBCASE("values strictly decrease with distance to the goal on an empty 3x3 grid") {
    GridWorld world(3, 3);
    world.goal = {1, 1};
    const auto v = tabular_value_iteration(world, 0.9, 10);
    for (std::size_t a = 0; a < 9; ++a) {
      for (std::size_t b = 0; b < 9; ++b) {
        if (manhattan(world.cell(a), world.goal) < manhattan(world.cell(b), world.goal)) CHECK(v[a] > v[b]);
      }
    }
  }
  SUBCASE("zero discount gives the best immediate reward") {
    GridWorld world = generate_grid_world(3, 8, 2);
    const auto one = tabular_value_iteration(world, 0.0, 1);
    const auto five = tabular_value_iteration(world, 0.0, 5);
    for (std::size_t i = 0; i < one.size(); ++i) {
      const Cell s = world.cell(i);
      double best = -1e9;
      for (int a = 0; a < kGridActions; ++a) best = std::max(best, transition_reward(world, s, a));
      CHECK(one[i] == best);
      CHECK(five[i] == one[i]);
    }
  }
  SUBCASE("each sweep contracts the distance to the fixed point by gamma") {
    GridWorld world = generate_grid_world(11, 8, 3);
    const double gamma = 0.9;
    const auto star = tabular_value_iteration(world, gamma, 1000);
    auto dist = [&](const std::vector<double>& v) {
      double d = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) d = std::max(d, std::abs(v[i] - star[i]));
      return d;
    };
    for (int k = 0; k < 30; ++k) {
      CHECK(dist(tabular_value_iteration(world, gamma, k + 1)) <= gamma * dist(tabular_value_iteration(world, gamma, k)) + 1e-12);
    }
  }
}

TEST_CASE("hand-built kernels reproduce tabular value iteration") {
  for (const auto& r : checks::vi_suite(7)) {
    INFO(r.detail);
    CHECK(r.passed);
  }
}
