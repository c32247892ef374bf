#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "macn/tensor.hpp"
#include "macn/worlds.hpp"

namespace macn {

class UnreachableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest 4-connected path by A* with the Manhattan heuristic. Ties on f are
// broken first-in-first-out with neighbours pushed in action order.
std::vector<int> astar_plan(const GridWorld& world, Cell start, Cell goal);

// Replans with A* on the running map estimate (unknown cells free) after
// every observation; in a tunnel this walks in until the dead end is seen
// and then backs out.
std::vector<int> exploring_plan(const GridWorld& world, Cell start, Cell goal);

// For every node, the next node on a BFS shortest path to `goal` (lowest id
// on ties); -1 at the goal itself.
std::vector<int> bfs_graph_expert(const GraphWorld& world, int goal);
std::vector<int> graph_demonstration(const GraphWorld& world, int start, int goal);

enum class Task { Grid, Tunnel, Graph };
std::string task_name(Task task);
Task parse_task(const std::string& name);

struct DataConfig {
  Task task = Task::Grid;
  int size = 16;           // grid and tunnel map side
  int level = 0;           // curriculum level: obstacle caps, or graph hop limit
  int tunnel_length = 8;
  int nodes = 9;
  std::uint64_t graph_seed = 1;  // the fixed graph of the graph task
  double success_probability = 1.0;
  int test_percent = 20;   // share of world digests held out
};

// One generated problem instance.
struct Scenario {
  Task task = Task::Grid;
  GridWorld grid;          // grid and tunnel tasks
  TunnelGeometry tunnel;   // tunnel task
  GraphWorld graph;        // graph task, start/goal set per scenario
  std::uint64_t world_id = 0;
  int level = 0;

  bool is_test(int test_percent) const { return static_cast<int>(world_id % 100) < test_percent; }
  int action_count() const { return task == Task::Graph ? graph.nodes() : kGridActions; }
};

Scenario make_scenario(const DataConfig& config, std::uint64_t seed);
// Expert actions for the scenario: A* on grids, the exploring planner in
// tunnels and BFS next hops on graphs.
std::vector<int> expert_actions(const Scenario& scenario);

// Network inputs and labels along an expert trajectory.
struct EpisodeSample {
  std::uint64_t episode = 0;
  std::uint64_t world_id = 0;
  int level = 0;
  Cell goal;
  std::vector<Tensor> obs;   // 2 x H x W per step
  std::vector<Cell> agents;  // crop centre per step
  std::vector<int> actions;
};

EpisodeSample demonstrate(const Scenario& scenario, std::uint64_t episode);

struct Dataset {
  DataConfig config;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  std::vector<Scenario> train, test;
  std::vector<EpisodeSample> train_samples, test_samples;
};

// Generates `count` scenarios from seed-derived streams and splits them by
// world digest, so a world never appears in both splits.
Dataset make_dataset(const DataConfig& config, std::size_t count, std::uint64_t seed, int jobs = 1);

// train.jsonl, test.jsonl and manifest.json under `dir`.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
std::string dataset_manifest(const Dataset& data);

}  // namespace macn
