#include "macn/checks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "macn/evaluator.hpp"
#include "macn/expert.hpp"

namespace macn::checks {

GradientReport finite_difference_check(const std::vector<Tensor>& inputs, const LossFn& loss, double eps) {
  for (const auto& t : inputs) t.zero_grad();
  {
    Tape tape;
    Tensor l = loss(tape, inputs);
    tape.backward(l);
  }
  GradientReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor x = inputs[k];
    if (!x.tracked()) continue;
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto v = x.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      Tape off(false);
      v[i] = saved + eps;
      const double up = loss(off, inputs).item();
      v[i] = saved - eps;
      const double down = loss(off, inputs).item();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = "input " + std::to_string(k) + " entry " + std::to_string(i);
      }
    }
  }
  return report;
}

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape), true);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

int bfs_distance(const GridWorld& world, Cell start, Cell goal) {
  if (world.occupied(start) || world.occupied(goal)) return -1;
  std::vector<int> dist(world.cell_count(), -1);
  std::deque<Cell> queue{start};
  dist[world.index(start)] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == goal) return dist[world.index(c)];
    for (const Cell d : kActionDelta) {
      const Cell t{c.row + d.row, c.col + d.col};
      if (world.occupied(t) || dist[world.index(t)] >= 0) continue;
      dist[world.index(t)] = dist[world.index(c)] + 1;
      queue.push_back(t);
    }
  }
  return -1;
}

std::vector<std::vector<int>> floyd_warshall(const GraphWorld& g) {
  const int n = g.nodes();
  constexpr int kFar = 1 << 20;
  std::vector<std::vector<int>> d(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), kFar));
  for (int i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (int j = 0; j < n; ++j) {
      if (g.edge(i, j)) d[i][j] = 1;
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  return d;
}

Tensor reward_layer(const GridWorld& world) {
  const auto h = static_cast<std::size_t>(world.height()), w = static_cast<std::size_t>(world.width());
  Tensor r({kGridActions, h, w});
  auto d = r.data();
  for (int a = 0; a < kGridActions; ++a) {
    for (std::size_t i = 0; i < h * w; ++i) {
      d[static_cast<std::size_t>(a) * h * w + i] = transition_reward(world, world.cell(i), a);
    }
  }
  return r;
}

ViWeights hand_vi_weights(double gamma) {
  ViWeights w;
  w.q0_weight = Tensor({4, 4, 3, 3});
  w.q0_bias = Tensor({4});
  w.q_weight = Tensor({4, 5, 3, 3});
  w.q_bias = Tensor({4});
  auto k = w.q_weight.data();
  auto at = [](std::size_t o, std::size_t i, std::size_t y, std::size_t x) { return ((o * 5 + i) * 3 + y) * 3 + x; };
  for (std::size_t a = 0; a < 4; ++a) {
    const Cell d = kActionDelta[a];
    k[at(a, a, 1, 1)] = 1.0;
    k[at(a, 4, static_cast<std::size_t>(1 + d.row), static_cast<std::size_t>(1 + d.col))] = gamma;
  }
  return w;
}

namespace {

CheckResult grad_result(const std::string& name, const GradientReport& g, double tol) {
  std::ostringstream detail;
  detail << "max relative error " << g.max_rel_error << " (tolerance " << tol << ")";
  if (!g.worst.empty()) detail << " at " << g.worst;
  return {name, g.max_rel_error < tol, detail.str()};
}

// Scalar readout sum(out * p) with a fixed random projection p.
Tensor project(Tape& tape, const Tensor& out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor p(out.shape());
  for (double& v : p.data()) v = rng.uniform(-1.0, 1.0);
  return ops::sum(tape, ops::mul(tape, out, p));
}

}  // namespace

std::vector<CheckResult> gradient_suite(std::uint64_t seed) {
  constexpr double kTol = 1e-4;
  Rng rng = Rng(seed).split("gradients");
  std::vector<CheckResult> out;
  auto check = [&](const std::string& name, std::vector<Tensor> inputs, auto body) {
    const std::uint64_t proj = rng.next();
    LossFn fn = [body, proj](Tape& t, const std::vector<Tensor>& in) { return project(t, body(t, in), proj); };
    out.push_back(grad_result(name, finite_difference_check(inputs, fn), kTol));
  };
  using V = const std::vector<Tensor>&;

  check("add", {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})}, [](Tape& t, V in) { return ops::add(t, in[0], in[1]); });
  check("sub", {random_tensor(rng, {5}), random_tensor(rng, {5})}, [](Tape& t, V in) { return ops::sub(t, in[0], in[1]); });
  check("mul", {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3})}, [](Tape& t, V in) { return ops::mul(t, in[0], in[1]); });
  check("scale", {random_tensor(rng, {4}), random_tensor(rng, {1})}, [](Tape& t, V in) { return ops::scale(t, in[0], in[1]); });
  check("scale_const", {random_tensor(rng, {4})}, [](Tape& t, V in) { return ops::scale(t, in[0], -2.5); });
  check("one_minus", {random_tensor(rng, {4})}, [](Tape& t, V in) { return ops::one_minus(t, in[0]); });
  check("sigmoid", {random_tensor(rng, {6})}, [](Tape& t, V in) { return ops::sigmoid(t, in[0]); });
  check("tanh", {random_tensor(rng, {6})}, [](Tape& t, V in) { return ops::tanh(t, in[0]); });
  {
    // keep inputs away from the kink at 0
    Tensor x = random_tensor(rng, {6}, 0.1, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
    check("relu", {x}, [](Tape& t, V in) { return ops::relu(t, in[0]); });
  }
  check("oneplus", {random_tensor(rng, {5})}, [](Tape& t, V in) { return ops::oneplus(t, in[0]); });
  check("softmax", {random_tensor(rng, {6})}, [](Tape& t, V in) { return ops::softmax(t, in[0], 3); });
  check("sum", {random_tensor(rng, {2, 3})}, [](Tape& t, V in) { return ops::sum(t, in[0]); });
  check("sum_squares", {random_tensor(rng, {5})}, [](Tape& t, V in) { return ops::sum_squares(t, in[0]); });
  check("matvec", {random_tensor(rng, {3, 4}), random_tensor(rng, {4})}, [](Tape& t, V in) { return ops::matvec(t, in[0], in[1]); });
  check("matvec_t", {random_tensor(rng, {3, 4}), random_tensor(rng, {3})}, [](Tape& t, V in) { return ops::matvec_t(t, in[0], in[1]); });
  check("linear", {random_tensor(rng, {3, 5}), random_tensor(rng, {5}), random_tensor(rng, {3})},
        [](Tape& t, V in) { return ops::linear(t, in[0], in[1], in[2]); });
  check("outer", {random_tensor(rng, {3}), random_tensor(rng, {4})}, [](Tape& t, V in) { return ops::outer(t, in[0], in[1]); });
  check("concat", {random_tensor(rng, {2}), random_tensor(rng, {3})}, [](Tape& t, V in) { return ops::concat(t, {in[0], in[1]}); });
  check("concat_channels", {random_tensor(rng, {1, 3, 3}), random_tensor(rng, {2, 3, 3})},
        [](Tape& t, V in) { return ops::concat_channels(t, {in[0], in[1]}); });
  check("slice", {random_tensor(rng, {6})}, [](Tape& t, V in) { return ops::slice(t, in[0], 2, 3); });
  check("reshape", {random_tensor(rng, {2, 3})}, [](Tape& t, V in) { return ops::reshape(t, in[0], {3, 2}); });
  check("conv2d", {random_tensor(rng, {2, 5, 6}), random_tensor(rng, {3, 2, 3, 3}), random_tensor(rng, {3})},
        [](Tape& t, V in) { return ops::conv2d(t, in[0], in[1], in[2]); });
  check("conv2d_1x1", {random_tensor(rng, {3, 4, 4}), random_tensor(rng, {2, 3, 1, 1}), random_tensor(rng, {2})},
        [](Tape& t, V in) { return ops::conv2d(t, in[0], in[1], in[2]); });
  {
    // channels separated by at least 0.2 so no perturbation flips the argmax
    Tensor x({3, 4, 4}, true);
    auto d = x.data();
    for (std::size_t p = 0; p < 16; ++p) {
      for (std::size_t c = 0; c < 3; ++c) d[c * 16 + p] = 0.3 * static_cast<double>((c + p) % 3) + rng.uniform(-0.05, 0.05);
    }
    check("channel_max", {x}, [](Tape& t, V in) { return ops::channel_max(t, in[0]); });
  }
  check("crop", {random_tensor(rng, {2, 5, 5})}, [](Tape& t, V in) { return ops::crop(t, in[0], 1, 4, 5); });
  {
    std::vector<Tensor> in{random_tensor(rng, {5})};
    LossFn fn = [](Tape& t, V v) { return ops::cross_entropy(t, v[0], 2); };
    out.push_back(grad_result("cross_entropy", finite_difference_check(in, fn), kTol));
  }
  check("lstm_step",
        {random_tensor(rng, {4}), random_tensor(rng, {4}), random_tensor(rng, {4}), random_tensor(rng, {16, 8}),
         random_tensor(rng, {16})},
        [](Tape& t, V in) {
          auto r = ops::lstm_step(t, in[0], in[1], in[2], {in[3], in[4]});
          return ops::concat(t, {r.h, r.c});
        });
  check("content_weighting", {random_tensor(rng, {5, 4}), random_tensor(rng, {4}), random_tensor(rng, {1}, 1.0, 3.0)},
        [](Tape& t, V in) { return content_weighting(t, in[0], in[1], in[2]); });
  {
    // distinct usage levels spaced 0.1 apart keep the sort order fixed
    Tensor u({6}, {0.35, 0.05, 0.55, 0.25, 0.45, 0.15}, true);
    check("allocation_weighting", {u}, [](Tape& t, V in) { return allocation_weighting(t, in[0]); });
  }
  {
    Tensor w = random_tensor(rng, {5}, 0.0, 0.2), p = random_tensor(rng, {5}, 0.0, 0.2);
    check("link_update", {random_tensor(rng, {5, 5}, 0.0, 0.2), w, p},
          [](Tape& t, V in) { return link_update(t, in[0], in[1], in[2]); });
  }
  {
    // memory read/write with a non-trivial prior state
    MemoryConfig mc{5, 3, 2};
    Rng srng = rng.split("state");
    MemoryState prior = initial_memory_state(mc);
    {
      Tape warm(false);
      for (int s = 0; s < 3; ++s) {
        Tensor raw({mc.interface_size()});
        for (double& v : raw.data()) v = srng.uniform(-1.0, 1.0);
        prior = memory_tick(warm, prior, split_interface(warm, raw, mc));
      }
    }
    Tensor raw = random_tensor(rng, {mc.interface_size()});
    Tensor mem = random_tensor(rng, {mc.slots, mc.word_size});
    check("memory_tick", {raw, mem}, [prior, mc](Tape& t, V in) {
      MemoryState s = prior;
      s.memory = in[1];
      MemoryState n = memory_tick(t, s, split_interface(t, in[0], mc));
      std::vector<Tensor> parts = n.read_vectors;
      parts.push_back(ops::reshape(t, n.memory, {n.memory.size()}));
      parts.push_back(n.usage);
      parts.push_back(ops::reshape(t, n.link, {n.link.size()}));
      return ops::concat(t, parts);
    });
  }
  {
    // composite conv -> channel_max -> linear
    check("conv_max_linear", {random_tensor(rng, {1, 4, 4}), random_tensor(rng, {3, 1, 3, 3}), random_tensor(rng, {3}),
                              random_tensor(rng, {2, 16}), random_tensor(rng, {2})},
          [](Tape& t, V in) {
            Tensor v = ops::channel_max(t, ops::conv2d(t, in[0], in[1], in[2]));
            return ops::linear(t, in[3], ops::reshape(t, v, {16}), in[4]);
          });
  }
  {
    // one full MACN step: tiny 8x8 world, N=4, W=4, R=1, hidden 8
    ModelConfig mc;
    mc.height = mc.width = 8;
    mc.hidden = 8;
    mc.memory = {4, 4, 1};
    mc.vi.iterations = 3;
    mc.vi.hidden_channels = 6;
    // a test point with no channel_max near-tie within eps of any parameter
    Model model(mc, 2);
    const GridWorld world = generate_grid_world(22, 8, 2);
    const Tensor obs = grid_obs_stack(observe(world, world.start), world.goal);
    std::vector<Tensor> params;
    for (const auto& e : model.params().entries()) params.push_back(e.value);
    const Cell agent = world.start;
    LossFn fn = [&model, obs, agent](Tape& t, V) {
      StepOutput s = model.forward_step(t, obs, agent, model.init_state());
      return ops::cross_entropy(t, s.logits, 1);
    };
    out.push_back(grad_result("macn_forward_step", finite_difference_check(params, fn), 1e-3));
  }
  return out;
}

std::vector<CheckResult> vi_suite(std::uint64_t seed) {
  constexpr double kGamma = 0.9, kTol = 1e-5;
  constexpr int kIterations = 20;
  Rng rng = Rng(seed).split("vi");
  std::vector<CheckResult> out;
  double worst = 0.0;
  int worlds = 0;
  const ViWeights w = hand_vi_weights(kGamma);
  VIConfig config;
  config.iterations = kIterations;
  // every interior goal of an empty 8x8 grid
  for (int r = 1; r < 7; ++r) {
    for (int c = 1; c < 7; ++c) {
      GridWorld world(8, 8);
      world.goal = {r, c};
      world.start = {(r + 3) % 8, (c + 5) % 8};
      Tape tape(false);
      const ValueMaps maps = vi_recurrence(tape, reward_layer(world), w, config);
      const std::vector<double> oracle = tabular_value_iteration(world, kGamma, kIterations);
      for (std::size_t i = 0; i < oracle.size(); ++i) worst = std::max(worst, std::abs(maps.v[i] - oracle[i]));
      ++worlds;
    }
  }
  (void)rng;
  std::ostringstream d;
  d << worlds << " worlds, max |V_conv - V_tab| = " << worst << " (tolerance " << kTol << ")";
  out.push_back({"vi_matches_tabular", worst < kTol, d.str()});
  return out;
}

std::vector<CheckResult> memory_suite(std::uint64_t seed, int steps) {
  Rng rng = Rng(seed).split("memory");
  std::vector<CheckResult> out;
  {
    const MemoryConfig mc{8, 4, 2};
    MemoryState s = initial_memory_state(mc);
    std::string failure;
    int step = 0;
    for (; step < steps && failure.empty(); ++step) {
      Tape tape(false);
      Tensor raw({mc.interface_size()});
      const double scale = rng.uniform(0.5, 6.0);
      for (double& v : raw.data()) v = rng.uniform(-scale, scale);
      s = memory_tick(tape, s, split_interface(tape, raw, mc));
      const auto v = memory_invariant_violations(s);
      if (!v.empty()) failure = "step " + std::to_string(step) + ": " + v.front();
    }
    out.push_back({"memory_invariants", failure.empty(),
                   failure.empty() ? std::to_string(steps) + " random steps, all invariants held" : failure});
  }

  const std::size_t n = 5, w = 3;
  const MemoryConfig mc{n, w, 1};
  MemoryState base = initial_memory_state(mc);
  for (double& v : base.memory.data()) v = rng.uniform(-1.0, 1.0);
  Tensor v = random_tensor(rng, {w});
  v.set_tracked(false);
  Tensor weights({n});
  for (double& x : weights.data()) x = rng.uniform(0.0, 0.2);
  auto m_at = [&](const Tensor& m, std::size_t i, std::size_t j) { return m[i * w + j]; };
  {
    Tape tape(false);
    Tensor onehot({n});
    onehot[2] = 1.0;
    const MemoryState next = apply_write(tape, base, onehot, Tensor({w}, std::vector<double>(w, 1.0)), v);
    bool exact = true;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double expect = i == 2 ? v[j] : m_at(base.memory, i, j);
        exact = exact && m_at(next.memory, i, j) == expect;
      }
    }
    out.push_back({"write_full_erase", exact, "one-hot write with e = 1 replaces row 2 by v and keeps the others"});
  }
  {
    Tape tape(false);
    const MemoryState next = apply_write(tape, base, weights, Tensor({w}), v);
    bool exact = true;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        exact = exact && m_at(next.memory, i, j) == m_at(base.memory, i, j) + weights[i] * v[j];
      }
    }
    out.push_back({"write_zero_erase", exact, "e = 0 gives M + w v^T"});
  }
  {
    Tape tape(false);
    const MemoryState next = apply_write(tape, base, weights, Tensor({w}, std::vector<double>(w, 1.0)), Tensor({w}));
    bool exact = true;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        exact = exact && m_at(next.memory, i, j) == m_at(base.memory, i, j) * (1.0 - weights[i]);
      }
    }
    out.push_back({"write_zero_vector", exact, "v = 0, e = 1 gives M * (1 - w 1^T)"});
  }
  {
    // two saturated writes through the allocation path land in slots 0 then 1
    Tape tape(false);
    MemoryState s = initial_memory_state(mc);
    InterfaceVector iv;
    iv.read_keys = {Tensor({w})};
    iv.read_strengths = {Tensor::scalar(1.0)};
    iv.write_key = Tensor({w});
    iv.write_strength = Tensor::scalar(1.0);
    iv.erase = Tensor({w}, std::vector<double>(w, 1.0));
    iv.write_vector = v;
    iv.free_gates = {Tensor::scalar(0.0)};
    iv.allocation_gate = Tensor::scalar(1.0);
    iv.write_gate = Tensor::scalar(1.0);
    iv.read_modes = {Tensor::vector({0.0, 0.0, 1.0})};
    s = write_step(tape, s, iv);
    const std::size_t first = static_cast<std::size_t>(
        std::max_element(s.write_weights.data().begin(), s.write_weights.data().end()) - s.write_weights.data().begin());
    s = write_step(tape, s, iv);
    const std::size_t second = static_cast<std::size_t>(
        std::max_element(s.write_weights.data().begin(), s.write_weights.data().end()) - s.write_weights.data().begin());
    const double link = s.link[second * n + first];
    // forward read from the first slot lands on the second
    s.read_weights = {Tensor({n})};
    s.read_weights[0][first] = 1.0;
    s = read_step(tape, s, iv);
    const bool forward = s.read_weights[0][second] == 1.0;
    std::ostringstream d;
    d << "writes at " << first << " then " << second << ", L[" << second << "," << first << "] = " << link
      << ", forward read " << (forward ? "one-hot at " + std::to_string(second) : "wrong");
    out.push_back({"temporal_link", first != second && link == 1.0 && forward, d.str()});
  }
  return out;
}

std::vector<CheckResult> expert_suite(std::uint64_t seed) {
  Rng rng = Rng(seed).split("expert");
  std::vector<CheckResult> out;
  {
    // random obstacle fields on every size from 2x2 to 10x10
    int compared = 0;
    std::string failure;
    for (int h = 2; h <= 10 && failure.empty(); ++h) {
      for (int w = 2; w <= 10 && failure.empty(); ++w) {
        for (int rep = 0; rep < 6; ++rep) {
          GridWorld g(h, w);
          const double density = rng.uniform(0.0, 0.4);
          for (std::size_t i = 0; i < g.cell_count(); ++i) {
            if (rng.uniform() < density) g.set_occupied(g.cell(i), true);
          }
          const Cell s = g.cell(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(g.cell_count()) - 1)));
          const Cell t = g.cell(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(g.cell_count()) - 1)));
          g.set_occupied(s, false);
          g.set_occupied(t, false);
          const int oracle = bfs_distance(g, s, t);
          int astar = -1;
          try {
            astar = static_cast<int>(astar_plan(g, s, t).size());
          } catch (const UnreachableError&) {
          }
          ++compared;
          if (astar != oracle) {
            failure = std::to_string(h) + "x" + std::to_string(w) + ": A* " + std::to_string(astar) + " vs BFS " +
                      std::to_string(oracle);
            break;
          }
        }
      }
    }
    out.push_back({"astar_vs_bfs_small", failure.empty(),
                   failure.empty() ? std::to_string(compared) + " grids up to 10x10 agree" : failure});
  }
  {
    std::string failure;
    for (int i = 0; i < 200 && failure.empty(); ++i) {
      const GridWorld g = generate_grid_world(rng.next(), 8, i % 4);
      const int astar = static_cast<int>(astar_plan(g, g.start, g.goal).size());
      const int oracle = bfs_distance(g, g.start, g.goal);
      if (astar != oracle) failure = "world " + std::to_string(i) + ": A* " + std::to_string(astar) + " vs BFS " + std::to_string(oracle);
    }
    out.push_back({"astar_vs_bfs_8x8", failure.empty(), failure.empty() ? "200 generated 8x8 worlds agree" : failure});
  }
  {
    std::vector<RolloutResult> results;
    std::string failure;
    auto replay = [&](const Scenario& sc, const std::string& what) {
      const int expert = static_cast<int>(expert_actions(sc).size());
      const RolloutResult r =
          expert_replay(sc, default_step_cap(sc.task, sc.grid.height(), expert, sc.graph.nodes()));
      if (!r.success && failure.empty()) failure = what + " replay ended with " + outcome_name(r.outcome);
      results.push_back(r);
    };
    for (int i = 0; i < 100; ++i) {
      DataConfig d;
      d.size = 16;
      d.level = i % 5;
      replay(make_scenario(d, rng.next()), "grid");
    }
    for (int i = 0; i < 50; ++i) {
      DataConfig d;
      d.task = Task::Tunnel;
      d.size = 16;
      d.tunnel_length = 8;
      replay(make_scenario(d, rng.next()), "tunnel");
    }
    for (int i = 0; i < 50; ++i) {
      DataConfig d;
      d.task = Task::Graph;
      d.level = 8;
      d.graph_seed = rng.next();
      replay(make_scenario(d, rng.next()), "graph");
    }
    const MetricsReport m = compute_metrics(results);
    std::ostringstream detail;
    detail << results.size() << " replays, success " << m.success << ", ratio " << m.astar_ratio;
    if (!failure.empty()) detail << "; " << failure;
    out.push_back({"expert_replay", m.success == 1.0 && m.astar_ratio == 1.0, detail.str()});
  }
  return out;
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  std::vector<CheckResult> all;
  for (auto&& part : {gradient_suite(seed), vi_suite(seed), memory_suite(seed), expert_suite(seed)}) {
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

}  // namespace macn::checks
