#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "macn/memory.hpp"
#include "macn/model.hpp"
#include "macn/vi.hpp"
#include "macn/worlds.hpp"

// Independent oracles and property suites shared by the unit tests, the
// `selftest` subcommand and the acceptance runner.
namespace macn::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using LossFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradientReport {
  double max_rel_error = 0.0;
  std::string worst;  // "input[i]" of the largest error
};

// Central differences of loss(inputs) against the tape's gradients. Relative
// error is |a - n| / max(|a|, |n|, 1e-6).
GradientReport finite_difference_check(const std::vector<Tensor>& inputs, const LossFn& loss, double eps = 1e-3);

// Tracked tensor with entries uniform in [lo, hi].
Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0);

// Shortest 4-connected path length by breadth-first search; -1 if unreachable.
int bfs_distance(const GridWorld& world, Cell start, Cell goal);
// All-pairs hop counts by Floyd-Warshall.
std::vector<std::vector<int>> floyd_warshall(const GraphWorld& graph);

// Reward layer R[a](s) = transition_reward(world, s, a).
Tensor reward_layer(const GridWorld& world);
// Weights whose recurrence computes Q_a(s) = R_a(s) + gamma V(s + delta_a), with
// a zero Q0 kernel so that V0 = 0.
ViWeights hand_vi_weights(double gamma);

// Gradient checks of every differentiable op and of one tiny MACN step.
std::vector<CheckResult> gradient_suite(std::uint64_t seed);
// Hand-built VI kernels against tabular value iteration on empty 8x8 grids.
std::vector<CheckResult> vi_suite(std::uint64_t seed);
// Random interface sequences, closed-form write cases and the link example.
std::vector<CheckResult> memory_suite(std::uint64_t seed, int steps = 1000);
// A* against BFS, and expert replay through the evaluator.
std::vector<CheckResult> expert_suite(std::uint64_t seed);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace macn::checks
