#include "macn/worlds.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace macn {

using nlohmann::json;

GridWorld::GridWorld(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("grid dimensions must be positive");
  labels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
}

void GridWorld::set_occupied(Cell c, bool occupied) {
  if (!in_bounds(c)) throw std::out_of_range("cell outside grid");
  labels_[index(c)] = occupied ? -1 : 0;
}

std::vector<Cell> GridWorld::occupied_cells() const {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0) out.push_back(cell(i));
  }
  return out;
}

Observation observe(const GridWorld& world, Cell agent) {
  Observation obs;
  obs.height = world.height();
  obs.width = world.width();
  obs.z.assign(world.cell_count(), 0);
  obs.mask.assign(world.cell_count(), 0);
  const int half = kSensorSize / 2;
  for (int r = std::max(0, agent.row - half); r <= std::min(world.height() - 1, agent.row + half); ++r) {
    for (int c = std::max(0, agent.col - half); c <= std::min(world.width() - 1, agent.col + half); ++c) {
      const std::size_t i = world.index({r, c});
      obs.mask[i] = 1;
      obs.z[i] = world.labels()[i];
    }
  }
  return obs;
}

std::vector<int> estimate_map(std::span<const Observation> history) {
  if (history.empty()) throw std::invalid_argument("estimate_map: empty observation history");
  std::vector<int> total(history.front().z.size(), 0);
  for (const auto& obs : history) {
    if (obs.z.size() != total.size()) throw std::invalid_argument("estimate_map: observation size mismatch");
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += obs.z[i];
  }
  for (int& v : total) v = std::max(v, -1);
  return total;
}

StepResult step_dynamics(const GridWorld& world, Cell s, int action) {
  if (action < 0 || action >= kGridActions) {
    throw std::out_of_range("invalid grid action " + std::to_string(action));
  }
  const Cell target = apply(s, action);
  StepResult out;
  if (world.occupied(target)) {
    out.next = s;
    out.collided = true;
    out.reward = -1.0;
  } else {
    out.next = target;
  }
  if (out.next == world.goal && !out.collided) out.reward = 1.0;
  return out;
}

ObstacleCaps obstacle_caps(int size, int level) {
  if (level < 0) throw std::invalid_argument("curriculum level must be >= 0");
  return {std::min(2 + 2 * level, std::max(2, size / 2)), std::min(2 + level, std::max(2, size / 4))};
}

namespace {

bool reachable(const GridWorld& w, Cell from, Cell to) {
  if (w.occupied(from) || w.occupied(to)) return false;
  std::vector<std::uint8_t> seen(w.cell_count(), 0);
  std::deque<Cell> queue{from};
  seen[w.index(from)] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == to) return true;
    for (int a = 0; a < kGridActions; ++a) {
      const Cell n = apply(c, a);
      if (w.occupied(n) || seen[w.index(n)]) continue;
      seen[w.index(n)] = 1;
      queue.push_back(n);
    }
  }
  return false;
}

Cell random_free_cell(const GridWorld& w, Rng& rng) {
  std::vector<Cell> free;
  for (std::size_t i = 0; i < w.cell_count(); ++i) {
    if (w.labels()[i] == 0) free.push_back(w.cell(i));
  }
  if (free.empty()) throw std::runtime_error("grid has no free cells");
  return free[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(free.size()) - 1))];
}

}  // namespace

GridWorld generate_grid_world(std::uint64_t seed, int size, int level) {
  if (size < 2) throw std::invalid_argument("grid size must be >= 2");
  const ObstacleCaps caps = obstacle_caps(size, level);
  Rng rng(seed);
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    GridWorld w(size, size);
    const int count = rng.uniform_int(1, caps.max_count);
    // Rectangles never overlap or touch, so each blob is one obstacle.
    std::vector<std::array<int, 4>> placed;
    for (int k = 0; k < count; ++k) {
      for (int tries = 0; tries < 20; ++tries) {
        const int h = rng.uniform_int(1, caps.max_side);
        const int wd = rng.uniform_int(1, caps.max_side);
        const int r = rng.uniform_int(0, size - h);
        const int c = rng.uniform_int(0, size - wd);
        const bool clash = std::any_of(placed.begin(), placed.end(), [&](const auto& p) {
          return r <= p[0] + p[2] && p[0] <= r + h && c <= p[1] + p[3] && p[1] <= c + wd;
        });
        if (clash) continue;
        placed.push_back({r, c, h, wd});
        for (int y = r; y < r + h; ++y)
          for (int x = c; x < c + wd; ++x) w.set_occupied({y, x}, true);
        break;
      }
    }
    w.start = random_free_cell(w, rng);
    w.goal = random_free_cell(w, rng);
    if (w.start == w.goal) continue;
    if (reachable(w, w.start, w.goal)) return w;
  }
  throw std::runtime_error("generate_grid_world: no feasible world after " + std::to_string(kMaxAttempts) +
                           " attempts (size " + std::to_string(size) + ", level " + std::to_string(level) + ")");
}

TunnelWorld generate_tunnel_world(std::uint64_t seed, int map_size, int tunnel_length) {
  // one free row above the opening, the closing wall, and a goal row below it
  if (tunnel_length < 1 || tunnel_length + 3 > map_size || map_size < 5) {
    throw std::invalid_argument("tunnel of length " + std::to_string(tunnel_length) + " does not fit a " +
                                std::to_string(map_size) + "x" + std::to_string(map_size) + " map");
  }
  Rng rng(seed);
  TunnelWorld out{GridWorld(map_size, map_size), {}};
  TunnelGeometry& t = out.tunnel;
  t.length = tunnel_length;
  t.column = rng.uniform_int(2, map_size - 3);
  t.top_row = rng.uniform_int(1, map_size - tunnel_length - 2);
  GridWorld& w = out.world;
  for (int r = t.top_row; r < t.top_row + t.length; ++r) {
    w.set_occupied({r, t.column - 1}, true);
    w.set_occupied({r, t.column + 1}, true);
  }
  for (int dc = -1; dc <= 1; ++dc) w.set_occupied({t.top_row + t.length, t.column + dc}, true);

  const int last_hidden = tunnel_length >= 4 ? tunnel_length - 4 : tunnel_length - 1;
  w.start = {t.top_row + rng.uniform_int(0, last_hidden), t.column};
  const int goal_row = rng.uniform_int(t.top_row + t.length + 1, map_size - 1);
  w.goal = {goal_row, rng.uniform_int(0, map_size - 1)};
  if (!reachable(w, w.start, w.goal)) throw std::logic_error("tunnel world without a path");
  return out;
}

bool sees_dead_end(const TunnelGeometry& tunnel, Cell agent) {
  if (!tunnel.inside(agent)) return false;
  const Cell wall = tunnel.dead_end_wall();
  const int half = kSensorSize / 2;
  return std::abs(wall.row - agent.row) <= half && std::abs(wall.col - agent.col) <= half;
}

GraphWorld::GraphWorld(int nodes) : n_(nodes) {
  if (nodes < 1) throw std::invalid_argument("graph needs at least one node");
  adjacency_.assign(static_cast<std::size_t>(nodes) * static_cast<std::size_t>(nodes), 0);
}

void GraphWorld::add_edge(int i, int j) {
  if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_) throw std::out_of_range("invalid graph edge");
  adjacency_[static_cast<std::size_t>(i * n_ + j)] = 1;
  adjacency_[static_cast<std::size_t>(j * n_ + i)] = 1;
}

std::size_t GraphWorld::edge_count() const {
  return static_cast<std::size_t>(std::count(adjacency_.begin(), adjacency_.end(), 1)) / 2;
}

std::vector<std::pair<int, int>> GraphWorld::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (edge(i, j)) out.emplace_back(i, j);
  return out;
}

std::vector<int> GraphWorld::neighbours(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (edge(i, j)) out.push_back(j);
  return out;
}

bool GraphWorld::connected() const {
  if (n_ == 0) return true;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n_), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int visited = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int u : neighbours(v)) {
      if (seen[static_cast<std::size_t>(u)]) continue;
      seen[static_cast<std::size_t>(u)] = 1;
      ++visited;
      queue.push_back(u);
    }
  }
  return visited == n_;
}

GraphWorld generate_graph_world(std::uint64_t seed, int nodes, int extra_edges) {
  if (nodes < 2) throw std::invalid_argument("graph world needs at least 2 nodes");
  Rng rng(seed);
  GraphWorld g(nodes);
  std::vector<int> order(static_cast<std::size_t>(nodes));
  std::iota(order.begin(), order.end(), 0);
  for (int i = nodes - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  for (int i = 1; i < nodes; ++i) {
    g.add_edge(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
  }
  const int max_edges = nodes * (nodes - 1) / 2;
  int extra = extra_edges < 0 ? rng.uniform_int(0, nodes) : extra_edges;
  extra = std::min(extra, max_edges - (nodes - 1));
  while (extra > 0) {
    const int i = rng.uniform_int(0, nodes - 1);
    const int j = rng.uniform_int(0, nodes - 1);
    if (i == j || g.edge(i, j)) continue;
    g.add_edge(i, j);
    --extra;
  }
  g.start = rng.uniform_int(0, nodes - 1);
  do {
    g.goal = rng.uniform_int(0, nodes - 1);
  } while (g.goal == g.start);
  return g;
}

GraphObservation observe(const GraphWorld& world, int node) {
  if (node < 0 || node >= world.nodes()) throw std::out_of_range("invalid graph node");
  const auto row = world.row(node);
  return {std::vector<std::uint8_t>(row.begin(), row.end()), node, world.goal};
}

GraphStepResult step_dynamics(const GraphWorld& world, int node, int action, Rng* rng) {
  if (action < 0 || action >= world.nodes()) {
    throw std::out_of_range("invalid graph action " + std::to_string(action));
  }
  GraphStepResult out{node, false, 0.0};
  if (!world.edge(node, action)) {
    out.invalid = true;
    out.reward = -1.0;
    return out;
  }
  const bool moves = world.success_probability >= 1.0 || (rng && rng->uniform() < world.success_probability);
  if (moves) out.next = action;
  if (out.next == world.goal) out.reward = 1.0;
  return out;
}

int graph_image_side(int nodes) {
  int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nodes))));
  while (side * side < nodes) ++side;
  return side;
}

namespace {

json cell_json(Cell c) { return json::array({c.row, c.col}); }

Cell json_cell(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("cell must be [row, col]");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

void require_format(const json& j, const char* expected) {
  if (!j.contains("format") || j.at("format") != expected) {
    throw std::invalid_argument(std::string("expected format ") + expected);
  }
}

}  // namespace

std::string to_json(const GridWorld& world) {
  json occupied = json::array();
  for (Cell c : world.occupied_cells()) occupied.push_back(cell_json(c));
  json j = {{"format", "macn-map-v1"},  {"width", world.width()},   {"height", world.height()},
            {"occupied", occupied},     {"start", cell_json(world.start)}, {"goal", cell_json(world.goal)}};
  return j.dump();
}

GridWorld grid_from_json(const std::string& text) {
  const json j = json::parse(text);
  require_format(j, "macn-map-v1");
  GridWorld w(j.at("height").get<int>(), j.at("width").get<int>());
  for (const auto& c : j.at("occupied")) w.set_occupied(json_cell(c), true);
  w.start = json_cell(j.at("start"));
  w.goal = json_cell(j.at("goal"));
  if (w.occupied(w.start) || w.occupied(w.goal)) throw std::invalid_argument("start and goal must be free cells");
  return w;
}

std::string to_json(const GraphWorld& world) {
  json edges = json::array();
  for (auto [i, j] : world.edges()) edges.push_back(json::array({i, j}));
  json j = {{"format", "macn-graph-v1"}, {"n", world.nodes()}, {"edges", edges},
            {"start", world.start},      {"goal", world.goal}};
  return j.dump();
}

GraphWorld graph_from_json(const std::string& text) {
  const json j = json::parse(text);
  require_format(j, "macn-graph-v1");
  GraphWorld g(j.at("n").get<int>());
  for (const auto& e : j.at("edges")) g.add_edge(e.at(0).get<int>(), e.at(1).get<int>());
  g.start = j.at("start").get<int>();
  g.goal = j.at("goal").get<int>();
  if (g.start < 0 || g.start >= g.nodes() || g.goal < 0 || g.goal >= g.nodes()) {
    throw std::invalid_argument("graph start/goal out of range");
  }
  return g;
}

std::uint64_t digest(const GridWorld& world) { return fnv1a(to_json(world)); }
std::uint64_t digest(const GraphWorld& world) { return fnv1a(to_json(world)); }

}  // namespace macn
