#include "macn/expert.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "macn/model.hpp"

namespace macn {

std::vector<int> astar_plan(const GridWorld& world, Cell start, Cell goal) {
  if (world.occupied(start) || world.occupied(goal)) {
    throw UnreachableError("astar_plan: start or goal is not a free cell");
  }
  const std::size_t n = world.cell_count();
  constexpr int kUnseen = -1;
  std::vector<int> g(n, kUnseen), parent_action(n, -1);
  std::vector<bool> closed(n, false);
  // (f, insertion order, cell index); the smallest entry is expanded first.
  using Entry = std::tuple<int, std::uint64_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t seq = 0;
  g[world.index(start)] = 0;
  open.emplace(manhattan(start, goal), seq++, world.index(start));
  while (!open.empty()) {
    const auto [f, order, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = true;
    const Cell c = world.cell(idx);
    if (c == goal) break;
    for (int a = 0; a < kGridActions; ++a) {
      const Cell t = apply(c, a);
      if (world.occupied(t)) continue;
      const std::size_t ti = world.index(t);
      if (closed[ti]) continue;
      const int cost = g[idx] + 1;
      if (g[ti] != kUnseen && g[ti] <= cost) continue;
      g[ti] = cost;
      parent_action[ti] = a;
      open.emplace(cost + manhattan(t, goal), seq++, ti);
    }
  }
  if (g[world.index(goal)] == kUnseen) {
    throw UnreachableError("astar_plan: no path from (" + std::to_string(start.row) + "," +
                           std::to_string(start.col) + ") to (" + std::to_string(goal.row) + "," +
                           std::to_string(goal.col) + ")");
  }
  std::vector<int> actions;
  for (Cell c = goal; c != start;) {
    const int a = parent_action[world.index(c)];
    actions.push_back(a);
    const Cell d = kActionDelta[static_cast<std::size_t>(a)];
    c = {c.row - d.row, c.col - d.col};
  }
  std::reverse(actions.begin(), actions.end());
  return actions;
}

std::vector<int> exploring_plan(const GridWorld& world, Cell start, Cell goal) {
  GridWorld estimate(world.height(), world.width());
  std::vector<int> actions;
  const std::size_t limit = 4 * world.cell_count();
  Cell s = start;
  while (s != goal) {
    const Observation z = observe(world, s);
    for (std::size_t i = 0; i < z.z.size(); ++i) {
      if (z.z[i] != 0) estimate.set_occupied(world.cell(i), true);
    }
    const std::vector<int> plan = astar_plan(estimate, s, goal);
    const StepResult r = step_dynamics(world, s, plan.front());
    if (r.collided) throw std::logic_error("exploring_plan: planned move into an unobserved obstacle");
    actions.push_back(plan.front());
    s = r.next;
    if (actions.size() > limit) throw UnreachableError("exploring_plan: exceeded step limit");
  }
  return actions;
}

std::vector<int> bfs_graph_expert(const GraphWorld& world, int goal) {
  const int n = world.nodes();
  std::vector<int> dist(static_cast<std::size_t>(n), -1), next(static_cast<std::size_t>(n), -1);
  std::deque<int> queue{goal};
  dist[static_cast<std::size_t>(goal)] = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int u : world.neighbours(v)) {
      if (dist[static_cast<std::size_t>(u)] != -1) continue;
      dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
      queue.push_back(u);
    }
  }
  for (int v = 0; v < n; ++v) {
    if (v == goal || dist[static_cast<std::size_t>(v)] < 0) continue;
    for (int u : world.neighbours(v)) {
      if (dist[static_cast<std::size_t>(u)] == dist[static_cast<std::size_t>(v)] - 1) {
        next[static_cast<std::size_t>(v)] = u;
        break;
      }
    }
  }
  return next;
}

std::vector<int> graph_demonstration(const GraphWorld& world, int start, int goal) {
  const std::vector<int> next = bfs_graph_expert(world, goal);
  std::vector<int> actions;
  for (int v = start; v != goal;) {
    v = next[static_cast<std::size_t>(v)];
    if (v < 0) throw UnreachableError("graph_demonstration: goal not reachable");
    actions.push_back(v);
  }
  return actions;
}

std::string task_name(Task task) {
  switch (task) {
    case Task::Grid: return "grid";
    case Task::Tunnel: return "tunnel";
    case Task::Graph: return "graph";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  for (Task t : {Task::Grid, Task::Tunnel, Task::Graph}) {
    if (task_name(t) == name) return t;
  }
  throw std::invalid_argument("unknown task '" + name + "' (expected grid, tunnel or graph)");
}

namespace {

int graph_hops(const GraphWorld& g, int start, int goal) {
  return static_cast<int>(graph_demonstration(g, start, goal).size());
}

}  // namespace

Scenario make_scenario(const DataConfig& config, std::uint64_t seed) {
  Scenario s;
  s.task = config.task;
  s.level = config.level;
  switch (config.task) {
    case Task::Grid:
      s.grid = generate_grid_world(seed, config.size, config.level);
      s.world_id = digest(s.grid);
      break;
    case Task::Tunnel: {
      TunnelWorld t = generate_tunnel_world(seed, config.size, config.tunnel_length);
      s.grid = std::move(t.world);
      s.tunnel = t.tunnel;
      s.world_id = digest(s.grid);
      break;
    }
    case Task::Graph: {
      s.graph = generate_graph_world(config.graph_seed, config.nodes);
      s.graph.success_probability = config.success_probability;
      const int max_hops = config.level + 1;
      Rng rng = Rng(seed).split("pair");
      for (int attempt = 0;; ++attempt) {
        const int a = static_cast<int>(rng.uniform_int(0, config.nodes - 1));
        const int b = static_cast<int>(rng.uniform_int(0, config.nodes - 1));
        if (a == b) continue;
        if (graph_hops(s.graph, a, b) <= max_hops || attempt > 1000) {
          s.graph.start = a;
          s.graph.goal = b;
          break;
        }
      }
      s.world_id = digest(s.graph);
      break;
    }
  }
  return s;
}

std::vector<int> expert_actions(const Scenario& s) {
  switch (s.task) {
    case Task::Grid: return astar_plan(s.grid, s.grid.start, s.grid.goal);
    case Task::Tunnel: return exploring_plan(s.grid, s.grid.start, s.grid.goal);
    case Task::Graph: return graph_demonstration(s.graph, s.graph.start, s.graph.goal);
  }
  return {};
}

EpisodeSample demonstrate(const Scenario& s, std::uint64_t episode) {
  EpisodeSample e;
  e.episode = episode;
  e.world_id = s.world_id;
  e.level = s.level;
  e.actions = expert_actions(s);
  if (s.task == Task::Graph) {
    const int n = s.graph.nodes();
    e.goal = graph_node_cell(s.graph.goal, n);
    int v = s.graph.start;
    for (int a : e.actions) {
      e.obs.push_back(graph_obs_stack(observe(s.graph, v), n));
      e.agents.push_back(graph_node_cell(v, n));
      v = a;
    }
    return e;
  }
  e.goal = s.grid.goal;
  Cell c = s.grid.start;
  for (int a : e.actions) {
    e.obs.push_back(grid_obs_stack(observe(s.grid, c), s.grid.goal));
    e.agents.push_back(c);
    c = step_dynamics(s.grid, c, a).next;
  }
  return e;
}

Dataset make_dataset(const DataConfig& config, std::size_t count, std::uint64_t seed, int jobs) {
  std::vector<Scenario> all(count);
  std::vector<EpisodeSample> samples(count);
  const Rng root = Rng(seed).split("dataset");
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      all[i] = make_scenario(config, root.split(static_cast<std::uint64_t>(i)).next());
      samples[i] = demonstrate(all[i], i);
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  Dataset d;
  d.config = config;
  d.seed = seed;
  d.requested = count;
  for (std::size_t i = 0; i < count; ++i) {
    if (all[i].is_test(config.test_percent)) {
      d.test.push_back(std::move(all[i]));
      d.test_samples.push_back(std::move(samples[i]));
    } else {
      d.train.push_back(std::move(all[i]));
      d.train_samples.push_back(std::move(samples[i]));
    }
  }
  return d;
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

std::uint64_t id_set_hash(const std::vector<Scenario>& scenarios) {
  std::vector<std::uint64_t> ids;
  for (const auto& s : scenarios) ids.push_back(s.world_id);
  std::sort(ids.begin(), ids.end());
  std::string bytes;
  for (auto id : ids) bytes += hex(id);
  return fnv1a(bytes);
}

void write_split(const std::vector<EpisodeSample>& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : samples) {
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      nlohmann::ordered_json j;
      j["episode"] = e.episode;
      j["step"] = t;
      std::vector<int> obs;
      for (double v : e.obs[t].data()) obs.push_back(static_cast<int>(v));
      j["obs"] = obs;
      j["reward_map_goal"] = {e.goal.row, e.goal.col};
      j["action"] = e.actions[t];
      j["world_id"] = hex(e.world_id);
      j["agent"] = {e.agents[t].row, e.agents[t].col};
      out << j.dump() << '\n';
    }
  }
}

}  // namespace

std::string dataset_manifest(const Dataset& d) {
  nlohmann::ordered_json j;
  j["format"] = "macn-dataset-v1";
  j["task"] = task_name(d.config.task);
  j["size"] = d.config.size;
  j["level"] = d.config.level;
  j["tunnel_length"] = d.config.tunnel_length;
  j["nodes"] = d.config.nodes;
  j["graph_seed"] = d.config.graph_seed;
  j["test_percent"] = d.config.test_percent;
  j["seed"] = d.seed;
  j["count"] = d.requested;
  j["train_count"] = d.train.size();
  j["test_count"] = d.test.size();
  j["train_ids_hash"] = hex(id_set_hash(d.train));
  j["test_ids_hash"] = hex(id_set_hash(d.test));
  std::vector<std::size_t> histogram;
  for (const auto* split : {&d.train_samples, &d.test_samples}) {
    for (const auto& e : *split) {
      for (int a : e.actions) {
        if (histogram.size() <= static_cast<std::size_t>(a)) histogram.resize(static_cast<std::size_t>(a) + 1, 0);
        ++histogram[static_cast<std::size_t>(a)];
      }
    }
  }
  j["label_histogram"] = histogram;
  auto ids = [](const std::vector<Scenario>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(hex(s.world_id));
    return out;
  };
  j["train_world_ids"] = ids(d.train);
  j["test_world_ids"] = ids(d.test);
  return j.dump(2);
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_split(d.train_samples, dir / "train.jsonl");
  write_split(d.test_samples, dir / "test.jsonl");
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << dataset_manifest(d) << '\n';
}

}  // namespace macn
