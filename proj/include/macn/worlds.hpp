#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macn/rng.hpp"

namespace macn {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

// Grid actions, in classification-label order.
enum class Action : int { Down = 0, Right = 1, Up = 2, Left = 3 };
inline constexpr int kGridActions = 4;
inline constexpr std::array<Cell, kGridActions> kActionDelta{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
inline constexpr std::array<const char*, kGridActions> kActionNames{"down", "right", "up", "left"};

inline Cell apply(Cell c, int action) {
  const Cell d = kActionDelta.at(static_cast<std::size_t>(action));
  return {c.row + d.row, c.col + d.col};
}

inline int manhattan(Cell a, Cell b) {
  return (a.row > b.row ? a.row - b.row : b.row - a.row) + (a.col > b.col ? a.col - b.col : b.col - a.col);
}

// Side of the square sensor footprint centred on the agent.
inline constexpr int kSensorSize = 7;

// Hidden labelling m in {-1, 0}: -1 occupied, 0 free.
class GridWorld {
 public:
  GridWorld() = default;
  GridWorld(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  // Out-of-bounds cells count as occupied.
  bool occupied(Cell c) const { return !in_bounds(c) || labels_[index(c)] != 0; }
  void set_occupied(Cell c, bool occupied);
  std::span<const std::int8_t> labels() const { return labels_; }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.col);
  }
  Cell cell(std::size_t index) const {
    return {static_cast<int>(index / static_cast<std::size_t>(width_)),
            static_cast<int>(index % static_cast<std::size_t>(width_))};
  }
  std::size_t cell_count() const { return labels_.size(); }
  std::vector<Cell> occupied_cells() const;

  Cell start{};
  Cell goal{};

  bool operator==(const GridWorld&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::int8_t> labels_;
};

struct Observation {
  int height = 0;
  int width = 0;
  std::vector<std::int8_t> z;      // -1 at observed occupied cells, 0 elsewhere
  std::vector<std::uint8_t> mask;  // 1 inside the clipped sensor footprint
  bool operator==(const Observation&) const = default;
};

Observation observe(const GridWorld& world, Cell agent);
// m_hat = max(sum_t z_t, -1), elementwise.
std::vector<int> estimate_map(std::span<const Observation> history);

struct StepResult {
  Cell next;
  bool collided = false;
  double reward = 0.0;
};

// Deterministic 4-neighbour move; blocked moves leave the agent in place.
StepResult step_dynamics(const GridWorld& world, Cell s, int action);

// Obstacle caps for a curriculum level on a size x size map.
struct ObstacleCaps {
  int max_count;
  int max_side;
};
ObstacleCaps obstacle_caps(int size, int level);

// Random rectangular obstacles with a free start/goal pair joined by a path.
GridWorld generate_grid_world(std::uint64_t seed, int size, int level);

struct TunnelGeometry {
  int column = 0;    // corridor column
  int top_row = 0;   // first corridor row (the opening is above it)
  int length = 0;    // corridor cells
  Cell dead_end_wall() const { return {top_row + length, column}; }
  Cell deepest() const { return {top_row + length - 1, column}; }
  bool inside(Cell c) const { return c.col == column && c.row >= top_row && c.row < top_row + length; }
  int depth(Cell c) const { return c.row - top_row; }
};

struct TunnelWorld {
  GridWorld world;
  TunnelGeometry tunnel;
};

// One vertical dead-end corridor of width 1, open at the top. The agent
// starts inside at a depth from which the dead end is not yet visible and
// the goal lies below the closed end, outside the corridor.
TunnelWorld generate_tunnel_world(std::uint64_t seed, int map_size, int tunnel_length);
// True when the agent is in the corridor and the dead-end wall lies inside
// its sensor footprint. Seeing the wall from outside does not count.
bool sees_dead_end(const TunnelGeometry& tunnel, Cell agent);

class GraphWorld {
 public:
  GraphWorld() = default;
  explicit GraphWorld(int nodes);

  int nodes() const { return n_; }
  bool edge(int i, int j) const { return adjacency_[static_cast<std::size_t>(i * n_ + j)] != 0; }
  void add_edge(int i, int j);
  std::span<const std::uint8_t> row(int i) const {
    return std::span<const std::uint8_t>(adjacency_).subspan(static_cast<std::size_t>(i * n_),
                                                             static_cast<std::size_t>(n_));
  }
  std::size_t edge_count() const;
  std::vector<std::pair<int, int>> edges() const;  // i < j, sorted
  bool connected() const;
  std::vector<int> neighbours(int i) const;

  int start = 0;
  int goal = 0;
  double success_probability = 1.0;

  bool operator==(const GraphWorld&) const = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> adjacency_;
};

// Random spanning tree plus `extra_edges` random additional edges (-1 picks
// a random count up to n).
GraphWorld generate_graph_world(std::uint64_t seed, int nodes, int extra_edges = -1);

struct GraphObservation {
  std::vector<std::uint8_t> row;  // adjacency row of the current node
  int node = 0;
  int goal = 0;
};

GraphObservation observe(const GraphWorld& world, int node);

struct GraphStepResult {
  int next = 0;
  bool invalid = false;
  double reward = 0.0;
};

// Moves to node `action` when it is adjacent. With success probability < 1
// a failed transition keeps the agent in place (drawn from `rng`).
GraphStepResult step_dynamics(const GraphWorld& world, int node, int action, Rng* rng = nullptr);

// Side of the square image an N-node adjacency row is reshaped into.
int graph_image_side(int nodes);

// Map and graph files.
std::string to_json(const GridWorld& world);
GridWorld grid_from_json(const std::string& text);
std::string to_json(const GraphWorld& world);
GraphWorld graph_from_json(const std::string& text);

// Stable content digest, used to split worlds into train/test sets.
std::uint64_t digest(const GridWorld& world);
std::uint64_t digest(const GraphWorld& world);

}  // namespace macn
