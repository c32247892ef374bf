#include <set>

#include "doctest.h"
#include "macn/checks.hpp"
#include "macn/expert.hpp"
#include "macn/worlds.hpp"

using namespace macn;

namespace {

// Obstacles as maximal rectangles: connected components of occupied cells
// must each fill their bounding box when generated at level 0 on a big map.
std::vector<std::pair<int, int>> component_boxes(const GridWorld& w) {
  std::vector<int> seen(w.cell_count(), 0);
  std::vector<std::pair<int, int>> boxes;
  for (std::size_t i = 0; i < w.cell_count(); ++i) {
    if (!w.occupied(w.cell(i)) || seen[i]) continue;
    std::vector<Cell> stack{w.cell(i)};
    seen[i] = 1;
    int r0 = 1 << 20, r1 = -1, c0 = 1 << 20, c1 = -1;
    while (!stack.empty()) {
      const Cell c = stack.back();
      stack.pop_back();
      r0 = std::min(r0, c.row), r1 = std::max(r1, c.row), c0 = std::min(c0, c.col), c1 = std::max(c1, c.col);
      for (int a = 0; a < kGridActions; ++a) {
        const Cell n = apply(c, a);
        if (w.in_bounds(n) && w.occupied(n) && !seen[w.index(n)]) {
          seen[w.index(n)] = 1;
          stack.push_back(n);
        }
      }
    }
    boxes.emplace_back(r1 - r0 + 1, c1 - c0 + 1);
  }
  return boxes;
}

}  // namespace

TEST_CASE("grid generation") {
  SUBCASE("level 0 on 32x32 keeps at most 2 obstacles of at most 2x2") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const GridWorld w = generate_grid_world(seed, 32, 0);
      CHECK(w.occupied_cells().size() <= 8);
      const ObstacleCaps caps = obstacle_caps(32, 0);
      CHECK(caps.max_count == 2);
      CHECK(caps.max_side == 2);
      // touching rectangles can merge; their union still fits the cell budget
      for (const auto& [h, wd] : component_boxes(w)) CHECK(h * wd <= 8);
    }
  }
  SUBCASE("caps grow with the level") {
    for (int level = 0; level < 6; ++level) {
      CHECK(obstacle_caps(64, level + 1).max_count > obstacle_caps(64, level).max_count);
      CHECK(obstacle_caps(64, level + 1).max_side > obstacle_caps(64, level).max_side);
    }
  }
  SUBCASE("same seed and level give the same world") {
    CHECK(generate_grid_world(9, 16, 2) == generate_grid_world(9, 16, 2));
    CHECK_FALSE(generate_grid_world(9, 16, 2) == generate_grid_world(10, 16, 2));
  }
  SUBCASE("start and goal are free and joined by a path") {
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const GridWorld w = generate_grid_world(seed, 16, static_cast<int>(seed % 4));
      CHECK_FALSE(w.occupied(w.start));
      CHECK_FALSE(w.occupied(w.goal));
      CHECK(astar_plan(w, w.start, w.goal).size() == static_cast<std::size_t>(checks::bfs_distance(w, w.start, w.goal)));
    }
  }
  SUBCASE("negative level is rejected") {
    CHECK_THROWS(generate_grid_world(1, 16, -1));
  }
}

TEST_CASE("tunnel generation") {
  SUBCASE("length 20 on 32x32: the optimal path leaves the tunnel and reaches the goal") {
    const TunnelWorld t = generate_tunnel_world(3, 32, 20);
    CHECK(t.tunnel.length == 20);
    CHECK(t.tunnel.inside(t.world.start));
    CHECK_FALSE(t.tunnel.inside(t.world.goal));
    const auto plan = astar_plan(t.world, t.world.start, t.world.goal);
    Cell c = t.world.start;
    bool left = false;
    for (int a : plan) {
      c = step_dynamics(t.world, c, a).next;
      left = left || !t.tunnel.inside(c);
    }
    CHECK(left);
    CHECK(c == t.world.goal);
  }
  SUBCASE("from the dead end the first move backs out") {
    TunnelWorld t = generate_tunnel_world(4, 16, 8);
    t.world.start = t.tunnel.deepest();
    const auto plan = exploring_plan(t.world, t.world.start, t.world.goal);
    REQUIRE_FALSE(plan.empty());
    CHECK(plan.front() == static_cast<int>(Action::Up));
  }
  SUBCASE("inside the tunnel, entering and exiting observations are identical") {
    const TunnelWorld t = generate_tunnel_world(5, 24, 14);
    const auto plan = exploring_plan(t.world, t.world.start, t.world.goal);
    std::vector<Cell> path{t.world.start};
    for (int a : plan) path.push_back(step_dynamics(t.world, path.back(), a).next);
    int compared = 0;
    for (std::size_t i = 0; i < path.size(); ++i) {
      for (std::size_t j = i + 1; j < path.size(); ++j) {
        if (path[i] != path[j] || !t.tunnel.inside(path[i]) || t.tunnel.depth(path[i]) <= 3) continue;
        if (plan[i] == plan[j]) continue;  // want an in-going and an out-going visit
        CHECK(observe(t.world, path[i]) == observe(t.world, path[j]));
        ++compared;
      }
    }
    CHECK(compared > 0);
  }
  SUBCASE("infeasible length is rejected") {
    CHECK_THROWS(generate_tunnel_world(1, 10, 9));
  }
}

TEST_CASE("graph generation") {
  SUBCASE("9 nodes: symmetric, connected, no self loops") {
    const GraphWorld g = generate_graph_world(1, 9);
    CHECK(g.nodes() == 9);
    for (int i = 0; i < 9; ++i) {
      CHECK_FALSE(g.edge(i, i));
      for (int j = 0; j < 9; ++j) CHECK(g.edge(i, j) == g.edge(j, i));
    }
    CHECK(g.connected());
  }
  SUBCASE("spanning tree budget gives N - 1 edges") {
    for (int n : {9, 16, 25, 36}) CHECK(generate_graph_world(2, n, 0).edge_count() == static_cast<std::size_t>(n - 1));
  }
  SUBCASE("distinct start and goal") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const GraphWorld g = generate_graph_world(s, 16);
      CHECK(g.start != g.goal);
    }
  }
  SUBCASE("BFS expert reaches the goal") {
    for (std::uint64_t s = 0; s < 500; ++s) {
      const GraphWorld g = generate_graph_world(s, 9);
      int v = g.start, steps = 0;
      for (int a : graph_demonstration(g, g.start, g.goal)) {
        const auto r = step_dynamics(g, v, a);
        REQUIRE_FALSE(r.invalid);
        v = r.next;
        ++steps;
      }
      CHECK(v == g.goal);
    }
  }
  SUBCASE("fewer than two nodes is rejected") {
    CHECK_THROWS(generate_graph_world(1, 1));
  }
}

TEST_CASE("grid observation") {
  GridWorld w(12, 12);
  w.set_occupied({5, 6}, true);
  w.set_occupied({0, 11}, true);
  SUBCASE("open space sees only zeros") {
    const Observation o = observe(w, {9, 2});
    for (auto z : o.z) CHECK(z == 0);
  }
  SUBCASE("adjacent obstacle is -1") {
    const Observation o = observe(w, {5, 5});
    CHECK(o.z[w.index({5, 6})] == -1);
  }
  SUBCASE("corner footprint is clipped") {
    const Observation o = observe(w, {0, 0});
    int visible = 0;
    for (auto m : o.mask) visible += m;
    CHECK(visible == 16);
  }
  SUBCASE("z equals the mask times the labels") {
    Rng rng(3);
    for (int k = 0; k < 200; ++k) {
      const GridWorld g = generate_grid_world(rng.next(), 16, 3);
      const Cell s{rng.uniform_int(0, 15), rng.uniform_int(0, 15)};
      const Observation o = observe(g, s);
      for (std::size_t i = 0; i < g.cell_count(); ++i) {
        const Cell c = g.cell(i);
        const bool in = std::abs(c.row - s.row) <= 3 && std::abs(c.col - s.col) <= 3;
        CHECK(o.mask[i] == (in ? 1 : 0));
        CHECK(o.z[i] == (in ? g.labels()[i] : 0));
        if (o.z[i] != 0) CHECK(o.mask[i] == 1);
      }
    }
  }
}

TEST_CASE("grid dynamics") {
  GridWorld w(4, 4);
  w.set_occupied({1, 2}, true);
  w.goal = {3, 3};
  SUBCASE("free move") {
    const StepResult r = step_dynamics(w, {1, 1}, static_cast<int>(Action::Down));
    CHECK(r.next == Cell{2, 1});
    CHECK_FALSE(r.collided);
    CHECK(r.reward == 0.0);
  }
  SUBCASE("wall and boundary collisions stay in place") {
    const StepResult a = step_dynamics(w, {1, 1}, static_cast<int>(Action::Right));
    CHECK(a.collided);
    CHECK(a.next == Cell{1, 1});
    CHECK(a.reward == -1.0);
    const StepResult b = step_dynamics(w, {0, 0}, static_cast<int>(Action::Up));
    CHECK(b.collided);
    CHECK(b.next == Cell{0, 0});
  }
  SUBCASE("reaching the goal pays 1") {
    CHECK(step_dynamics(w, {2, 3}, static_cast<int>(Action::Down)).reward == 1.0);
  }
  SUBCASE("moves never jump") {
    Rng rng(4);
    const GridWorld g = generate_grid_world(5, 16, 3);
    for (int k = 0; k < 500; ++k) {
      const Cell s{rng.uniform_int(0, 15), rng.uniform_int(0, 15)};
      CHECK(manhattan(step_dynamics(g, s, rng.uniform_int(0, 3)).next, s) <= 1);
    }
  }
  SUBCASE("invalid action is rejected") {
    CHECK_THROWS(step_dynamics(w, {0, 0}, 4));
  }
}

TEST_CASE("graph dynamics") {
  GraphWorld g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  CHECK(step_dynamics(g, 0, 1).next == 1);
  CHECK_FALSE(step_dynamics(g, 0, 1).invalid);
  CHECK(step_dynamics(g, 0, 2).invalid);
  SUBCASE("a failed transition stays put") {
    g.success_probability = 0.5;
    Rng rng(1);
    int stayed = 0;
    for (int k = 0; k < 1000; ++k) stayed += step_dynamics(g, 0, 1, &rng).next == 0;
    CHECK(stayed > 400);
    CHECK(stayed < 600);
  }
}

TEST_CASE("map estimate") {
  GridWorld w = generate_grid_world(21, 16, 3);
  SUBCASE("one all-zero observation") {
    Observation o = observe(GridWorld(16, 16), {8, 8});
    for (int v : estimate_map(std::span<const Observation>(&o, 1))) CHECK(v == 0);
  }
  SUBCASE("repeated sightings clamp at -1") {
    const Cell c = w.occupied_cells().front();
    std::vector<Observation> h(3, observe(w, c));
    CHECK(estimate_map(h)[w.index(c)] == -1);
  }
  SUBCASE("equals the labels on the union of footprints") {
    std::vector<Observation> h;
    Cell s = w.start;
    std::vector<int> visible(w.cell_count(), 0);
    for (int a : astar_plan(w, w.start, w.goal)) {
      h.push_back(observe(w, s));
      for (std::size_t i = 0; i < w.cell_count(); ++i) {
        const Cell c = w.cell(i);
        if (std::abs(c.row - s.row) <= 3 && std::abs(c.col - s.col) <= 3) visible[i] = 1;
      }
      s = step_dynamics(w, s, a).next;
    }
    const auto m = estimate_map(h);
    for (std::size_t i = 0; i < w.cell_count(); ++i) CHECK(m[i] == (visible[i] ? w.labels()[i] : 0));
  }
}

TEST_CASE("map and graph files round trip") {
  const GridWorld w = generate_grid_world(8, 16, 2);
  const std::string text = to_json(w);
  CHECK(text.find("macn-map-v1") != std::string::npos);
  CHECK(grid_from_json(text) == w);
  CHECK(to_json(grid_from_json(text)) == text);
  const GraphWorld g = generate_graph_world(8, 16);
  const std::string gt = to_json(g);
  CHECK(gt.find("macn-graph-v1") != std::string::npos);
  CHECK(graph_from_json(gt) == g);
  CHECK(to_json(graph_from_json(gt)) == gt);
}

TEST_CASE("the dead end only counts as seen from inside the corridor") {
  const TunnelWorld t = generate_tunnel_world(5, 16, 8);
  const TunnelGeometry& g = t.tunnel;
  CHECK(sees_dead_end(g, g.deepest()));
  CHECK_FALSE(sees_dead_end(g, {g.top_row, g.column}));
  // beside the closing wall, outside the corridor
  CHECK_FALSE(sees_dead_end(g, {g.top_row + g.length, g.column + 2}));
  CHECK_FALSE(sees_dead_end(g, {g.top_row + g.length + 1, g.column}));
}
