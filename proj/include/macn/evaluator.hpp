#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "macn/expert.hpp"
#include "macn/model.hpp"

namespace macn {

enum class Outcome { ReachedGoal, StepCap, Collision, InvalidMove };
std::string outcome_name(Outcome outcome);

struct RolloutResult {
  Outcome outcome = Outcome::StepCap;
  int steps = 0;
  int expert_steps = 0;
  bool saw_dead_end = false;  // tunnel task
  bool success = false;       // goal reached (and, in tunnels, the dead end seen)
  std::vector<Cell> path;     // grid cells, or graph nodes as {node, 0}
  std::vector<int> actions;

  // steps / expert_steps; 1 when start == goal.
  double ratio() const;
};

// 40 / 60 / 80 for 16 / 32 / 64 grids, linear in between. Tunnels allow at
// least twice the expert path, graphs 2N moves.
int default_step_cap(Task task, int size, int expert_steps = 0, int nodes = 0);

struct StepRecord {
  int step = 0;
  Cell agent;
  int action = 0;
  StepOutput output;
  ModelState input;  // state the step started from
  bool dead_end_visible = false;
};
using StepObserver = std::function<void(const StepRecord&)>;

// Greedy closed-loop episode from a fresh state: terminates on the goal, a
// collision (invalid move on graphs) or the step cap. Graph transitions with
// success probability < 1 draw from `seed`.
RolloutResult rollout(const Model& model, const Scenario& scenario, int step_cap, std::uint64_t seed = 0,
                      const StepObserver& observer = {});

// Moves replayed from the expert, through the same dynamics and success rule.
RolloutResult expert_replay(const Scenario& scenario, int step_cap);

std::vector<RolloutResult> rollout_all(const Model& model, const std::vector<Scenario>& scenarios, int jobs,
                                       std::uint64_t seed = 0);

struct MetricsReport {
  std::size_t episodes = 0;
  double success = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();
  double astar_ratio = std::numeric_limits<double>::infinity();
  std::optional<int> max_generalization_length;
  std::vector<std::pair<int, double>> sweep;  // tunnel length -> success
};

MetricsReport compute_metrics(const std::vector<RolloutResult>& results);

std::string to_json(const MetricsReport& report);
std::string to_csv(const MetricsReport& report);

struct SweepConfig {
  int start_length = 8;
  int step = 2;
  int max_length = 64;
  std::size_t worlds = 20;
  double threshold = 1.0;  // success required to keep sweeping
};

// Longest tunnel length, from start_length upwards, whose success rate meets
// the threshold. Maps grow with the tunnel (side = max(training side, length + 8)).
// Returns the per-length success rates in the report's sweep.
MetricsReport tunnel_sweep(const Model& model, const DataConfig& data, const SweepConfig& sweep, std::uint64_t seed,
                           int jobs);

// Per-step CSV: step,row,col,action, logit_*, write_w_*, read_w<h>_*, usage_*,
// ctrl_*, vcrop_*. The memory columns hold the state the step started from,
// so step 0 of a fresh episode is all zeros. They are absent for variants
// without memory.
void export_activations(const Model& model, const Scenario& scenario, int step_cap, std::ostream& out);

// Index of the first step whose usage change is at least `factor` times the
// median change, searched within +-window steps of `event_step`; -1 if none.
int usage_spike_near(const std::vector<std::vector<double>>& usage, int event_step, double factor = 5.0,
                     int window = 1);

}  // namespace macn
