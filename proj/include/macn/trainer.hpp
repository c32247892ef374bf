#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "macn/expert.hpp"
#include "macn/model.hpp"

namespace macn {

struct CurriculumStep {
  int level = 0;
  int epoch = 0;  // first epoch at which `level` applies
};

// Largest scheduled level whose epoch threshold has been reached; 0 for an
// empty schedule.
int curriculum_next(int current, int epoch, const std::vector<CurriculumStep>& schedule);

struct TrainConfig {
  int epochs = 10;
  std::size_t train_worlds = 200;  // generated per curriculum level; test-split digests are dropped
  std::size_t test_worlds = 50;    // held-out scenarios for the test error
  double learning_rate = 1e-4;
  double decay = 0.9;
  double epsilon = 1e-8;
  std::vector<CurriculumStep> schedule;
  double l2_access = 0.0;  // on raw interface outputs
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  int jobs = 1;            // held-out evaluation only
  bool shuffle = true;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double test_error = 0.0;
  int curriculum_level = 0;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  double initial_test_error = 0.0;
  std::filesystem::path checkpoint;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mean cross-entropy of the unrolled episode from a fresh state plus
// l2 * sum_t ||interface_t||^2. Rejects empty episodes.
Tensor loss_episode(Tape& tape, const Model& model, const EpisodeSample& episode, double l2_access = 0.0);

// Fraction of steps whose greedy action differs from the expert label under
// teacher forcing (state reset per episode).
double test_error(const Model& model, const std::vector<EpisodeSample>& episodes, int jobs = 1);

// Held-out scenarios for a data configuration: only digests in the test split.
std::vector<Scenario> held_out_scenarios(const DataConfig& data, std::size_t count, std::uint64_t seed);
// Training scenarios: only digests outside the test split.
std::vector<Scenario> training_scenarios(const DataConfig& data, std::size_t count, std::uint64_t seed);

// Returns false to stop after this epoch.
// The training worlds train() uses at a curriculum level.
std::vector<Scenario> curriculum_scenarios(const DataConfig& data, const TrainConfig& config, int level);

using EpochCallback = std::function<bool(const EpochLog&)>;

// One RMSProp step per episode, episodes shuffled per epoch. Without a
// schedule every epoch trains at data.level. Writes
// checkpoint.bin, model.json and train_log.csv into `out_dir` when it is
// non-empty. A non-finite loss restores the last good parameters, saves them
// and throws TrainingDiverged.
TrainReport train(Model& model, const DataConfig& data, const TrainConfig& config,
                  const std::filesystem::path& out_dir = {}, const EpochCallback& on_epoch = {});

}  // namespace macn
