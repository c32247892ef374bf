#include "macn/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "macn/parallel.hpp"

namespace macn {

std::string outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::ReachedGoal: return "reached_goal";
    case Outcome::StepCap: return "step_cap";
    case Outcome::Collision: return "collision";
    case Outcome::InvalidMove: return "invalid_move";
  }
  return "?";
}

double RolloutResult::ratio() const {
  if (expert_steps == 0) return 1.0;
  return static_cast<double>(steps) / static_cast<double>(expert_steps);
}

int default_step_cap(Task task, int size, int expert_steps, int nodes) {
  if (task == Task::Graph) return 2 * nodes;
  int cap;
  if (size <= 16) {
    cap = 40;
  } else if (size <= 32) {
    cap = 40 + (size - 16) * 20 / 16;
  } else {
    cap = 60 + (size - 32) * 20 / 32;
  }
  if (task == Task::Tunnel) cap = std::max(cap, 2 * expert_steps);
  return cap;
}

namespace {

std::size_t argmax(const Tensor& logits) {
  auto d = logits.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

// Shared episode loop; `policy(t, agent_cell, obs)` returns the action.
template <class Policy>
RolloutResult run_episode(const Scenario& sc, int step_cap, std::uint64_t seed, Policy policy) {
  RolloutResult r;
  r.expert_steps = static_cast<int>(expert_actions(sc).size());
  if (sc.task == Task::Graph) {
    Rng rng = Rng(seed).split(sc.world_id);
    const int n = sc.graph.nodes();
    int v = sc.graph.start;
    r.path.push_back({v, 0});
    while (v != sc.graph.goal && r.steps < step_cap) {
      const int a = policy(r.steps, graph_node_cell(v, n), graph_obs_stack(observe(sc.graph, v), n), false);
      r.actions.push_back(a);
      ++r.steps;
      const GraphStepResult s = step_dynamics(sc.graph, v, a, &rng);
      if (s.invalid) {
        r.outcome = Outcome::InvalidMove;
        return r;
      }
      v = s.next;
      r.path.push_back({v, 0});
    }
    r.outcome = v == sc.graph.goal ? Outcome::ReachedGoal : Outcome::StepCap;
    r.success = r.outcome == Outcome::ReachedGoal;
    return r;
  }

  const bool tunnel = sc.task == Task::Tunnel;
  Cell c = sc.grid.start;
  r.path.push_back(c);
  r.saw_dead_end = tunnel && sees_dead_end(sc.tunnel, c);
  while (c != sc.grid.goal && r.steps < step_cap) {
    const int a = policy(r.steps, c, grid_obs_stack(observe(sc.grid, c), sc.grid.goal),
                         tunnel && sees_dead_end(sc.tunnel, c));
    r.actions.push_back(a);
    ++r.steps;
    const StepResult s = step_dynamics(sc.grid, c, a);
    if (s.collided) {
      r.outcome = Outcome::Collision;
      return r;
    }
    c = s.next;
    r.path.push_back(c);
    if (tunnel && sees_dead_end(sc.tunnel, c)) r.saw_dead_end = true;
  }
  r.outcome = c == sc.grid.goal ? Outcome::ReachedGoal : Outcome::StepCap;
  r.success = r.outcome == Outcome::ReachedGoal && (!tunnel || r.saw_dead_end);
  return r;
}

Model model_for(const Model& model, const Scenario& sc) {
  const ModelConfig& c = model.config();
  int h = sc.grid.height(), w = sc.grid.width();
  if (sc.task == Task::Graph) h = w = graph_image_side(sc.graph.nodes());
  if (c.height == h && c.width == w) return model;
  return model.resized(h, w, sc.task == Task::Graph ? c.vi.iterations : default_iterations(std::max(h, w)));
}

}  // namespace

RolloutResult rollout(const Model& model, const Scenario& scenario, int step_cap, std::uint64_t seed,
                      const StepObserver& observer) {
  const Model m = model_for(model, scenario);
  if (scenario.task == Task::Graph && m.config().actions != static_cast<std::size_t>(scenario.graph.nodes())) {
    throw std::invalid_argument("rollout: model has " + std::to_string(m.config().actions) + " actions, graph has " +
                                std::to_string(scenario.graph.nodes()) + " nodes");
  }
  Tape tape(false);
  ModelState state = m.init_state();
  return run_episode(scenario, step_cap, seed, [&](int t, Cell agent, const Tensor& obs, bool dead_end) {
    StepOutput out = m.forward_step(tape, obs, agent, state);
    const int a = static_cast<int>(argmax(out.logits));
    if (observer) observer({t, agent, a, out, state, dead_end});
    state = std::move(out.state);
    return a;
  });
}

RolloutResult expert_replay(const Scenario& scenario, int step_cap) {
  const std::vector<int> plan = expert_actions(scenario);
  return run_episode(scenario, step_cap, 0, [&](int t, Cell, const Tensor&, bool) {
    return plan.at(static_cast<std::size_t>(t));
  });
}

std::vector<RolloutResult> rollout_all(const Model& model, const std::vector<Scenario>& scenarios, int jobs,
                                       std::uint64_t seed) {
  std::vector<RolloutResult> out(scenarios.size());
  parallel_over(model, scenarios.size(), jobs, [&](const Model& m, std::size_t i) {
    const Scenario& sc = scenarios[i];
    const int expert = static_cast<int>(expert_actions(sc).size());
    const int cap = default_step_cap(sc.task, sc.grid.height(), expert, sc.graph.nodes());
    out[i] = rollout(m, sc, cap, seed);
  });
  return out;
}

MetricsReport compute_metrics(const std::vector<RolloutResult>& results) {
  if (results.empty()) throw std::invalid_argument("compute_metrics: no rollouts");
  MetricsReport m;
  m.episodes = results.size();
  std::size_t wins = 0;
  double ratio_sum = 0.0;
  for (const auto& r : results) {
    if (!r.success) continue;
    ++wins;
    ratio_sum += r.ratio();
  }
  m.success = static_cast<double>(wins) / static_cast<double>(results.size());
  if (wins > 0) m.astar_ratio = ratio_sum / static_cast<double>(wins);
  return m;
}

namespace {

std::string number(double v) {
  if (std::isinf(v)) return "inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

}  // namespace

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["episodes"] = r.episodes;
  j["success"] = r.success;
  // JSON has no infinity or NaN; those are written as strings.
  auto put = [&](const char* key, double v) {
    if (std::isfinite(v)) {
      j[key] = v;
    } else {
      j[key] = number(v);
    }
  };
  put("test_error", r.test_error);
  put("astar_ratio", r.astar_ratio);
  if (r.max_generalization_length) {
    j["max_generalization_length"] = *r.max_generalization_length;
  } else {
    j["max_generalization_length"] = nullptr;
  }
  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  for (const auto& [length, success] : r.sweep) sweep.push_back({{"length", length}, {"success", success}});
  j["sweep"] = sweep;
  return j.dump(2);
}

std::string to_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "episodes,success,test_error,astar_ratio,max_generalization_length\n";
  out << r.episodes << ',' << number(r.success) << ',' << number(r.test_error) << ',' << number(r.astar_ratio) << ',';
  if (r.max_generalization_length) out << *r.max_generalization_length;
  out << '\n';
  return out.str();
}

MetricsReport tunnel_sweep(const Model& model, const DataConfig& data, const SweepConfig& sweep, std::uint64_t seed,
                           int jobs) {
  MetricsReport report;
  std::vector<RolloutResult> all;
  for (int length = sweep.start_length; length <= sweep.max_length; length += sweep.step) {
    DataConfig d = data;
    d.task = Task::Tunnel;
    d.tunnel_length = length;
    d.size = std::max(data.size, length + 8);
    const Rng root = Rng(seed).split("sweep").split(static_cast<std::uint64_t>(length));
    std::vector<Scenario> worlds;
    for (std::size_t i = 0; i < sweep.worlds; ++i) {
      worlds.push_back(make_scenario(d, root.split(static_cast<std::uint64_t>(i)).next()));
    }
    const auto results = rollout_all(model, worlds, jobs, seed);
    const MetricsReport m = compute_metrics(results);
    report.sweep.emplace_back(length, m.success);
    all.insert(all.end(), results.begin(), results.end());
    if (m.success < sweep.threshold) break;
    report.max_generalization_length = length;
  }
  if (!all.empty()) {
    const MetricsReport agg = compute_metrics(all);
    report.episodes = agg.episodes;
    report.success = agg.success;
    report.astar_ratio = agg.astar_ratio;
  }
  return report;
}

void export_activations(const Model& model, const Scenario& scenario, int step_cap, std::ostream& out) {
  const ModelConfig& c = model.config();
  const bool memory = c.has_memory();
  const std::size_t n = c.memory.slots;
  const std::size_t actions = scenario.action_count();
  out << "step,row,col,action";
  for (std::size_t i = 0; i < actions; ++i) out << ",logit_" << i;
  if (memory) {
    for (std::size_t i = 0; i < n; ++i) out << ",write_w_" << i;
    for (std::size_t h = 0; h < c.memory.read_heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) out << ",read_w" << h << '_' << i;
    }
    for (std::size_t i = 0; i < n; ++i) out << ",usage_" << i;
  }
  if (c.has_state()) {
    for (std::size_t i = 0; i < c.hidden; ++i) out << ",ctrl_" << i;
  }
  for (int i = 0; i < kValueCrop * kValueCrop; ++i) out << ",vcrop_" << i;
  out << '\n';
  out << std::setprecision(9);
  auto row = [&out](const Tensor& t) {
    for (double v : t.data()) out << ',' << v;
  };
  rollout(model, scenario, step_cap, 0, [&](const StepRecord& s) {
    out << s.step << ',' << s.agent.row << ',' << s.agent.col << ',' << s.action;
    row(s.output.logits);
    if (memory) {
      const MemoryState& m = s.input.memory;
      row(m.write_weights);
      for (const auto& w : m.read_weights) row(w);
      row(m.usage);
    }
    if (c.has_state()) row(s.output.controller_out);
    row(s.output.value_crop);
    out << '\n';
  });
}

int usage_spike_near(const std::vector<std::vector<double>>& usage, int event_step, double factor, int window) {
  if (usage.empty() || event_step < 0) return -1;
  std::vector<double> delta(usage.size());
  for (std::size_t t = 0; t < usage.size(); ++t) {
    double sq = 0.0;
    for (std::size_t i = 0; i < usage[t].size(); ++i) {
      const double prev = t == 0 ? 0.0 : usage[t - 1][i];
      sq += (usage[t][i] - prev) * (usage[t][i] - prev);
    }
    delta[t] = std::sqrt(sq);
  }
  std::vector<double> sorted = delta;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  const double median = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  const int lo = std::max(0, event_step - window);
  const int hi = std::min(static_cast<int>(delta.size()) - 1, event_step + window);
  for (int t = lo; t <= hi; ++t) {
    const double d = delta[static_cast<std::size_t>(t)];
    if (d > 0.0 && d >= factor * median) return t;
  }
  return -1;
}

}  // namespace macn
