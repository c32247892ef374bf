#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "macn/evaluator.hpp"
#include "macn/expert.hpp"
#include "macn/model.hpp"
#include "macn/trainer.hpp"

namespace macn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  SweepConfig sweep;        // tunnel task
  std::size_t dataset_worlds = 1000;  // gen-data
  std::size_t eval_worlds = 200;      // held-out rollouts in eval
  int step_cap = 40;
  std::uint64_t seed = 0;
  std::string out = "runs/experiment";

  // Cross-field checks: action count, map size and step cap agree with the task.
  void validate() const;
};

// Defaults for a task: grid 16x16 with K=20, N=32, W=8, R=4 and cap 40;
// tunnels with R=1 and L2 1e-4 on memory access; graphs with R=1.
ExperimentConfig default_experiment(Task task, int size = 16, int nodes = 9);

// Parses JSON, fills every omitted field with the task defaults and
// validates. Unknown keys are rejected by name.
ExperimentConfig parse_experiment(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical JSON with every field present; parse_experiment(dump(c)) == c.
std::string dump_experiment(const ExperimentConfig& config);

// Sets the variant and keeps size-dependent fields consistent.
void set_variant(ExperimentConfig& config, Variant variant);

// Loads a checkpoint; the architecture comes from model.json beside it when
// present, otherwise from `fallback`. Throws CheckpointError("checkpoint not
// found: ...") for a missing file.
Model load_model(const std::filesystem::path& checkpoint, const ModelConfig& fallback);

// Held-out scenarios of the experiment (test-split digests only).
std::vector<Scenario> evaluation_scenarios(const ExperimentConfig& config);

// Greedy rollouts and teacher-forced test error on the held-out scenarios;
// tunnel experiments add the length sweep.
MetricsReport evaluate_experiment(const Model& model, const ExperimentConfig& config, int jobs);

}  // namespace macn
