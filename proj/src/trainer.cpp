#include "macn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "macn/parallel.hpp"

namespace macn {

int curriculum_next(int current, int epoch, const std::vector<CurriculumStep>& schedule) {
  (void)current;
  int level = 0;
  for (const auto& step : schedule) {
    if (step.epoch <= epoch) level = std::max(level, step.level);
  }
  return level;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip norm must be > 0");
  if (l2_access < 0.0) throw std::invalid_argument("L2 coefficient must be >= 0");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].level < schedule[i - 1].level || schedule[i].epoch < schedule[i - 1].epoch) {
      throw std::invalid_argument("curriculum schedule must be non-decreasing in level and epoch");
    }
  }
}

Tensor loss_episode(Tape& tape, const Model& model, const EpisodeSample& episode, double l2_access) {
  if (episode.actions.empty()) throw std::invalid_argument("loss_episode: empty episode");
  ModelState state = model.init_state();
  std::vector<Tensor> terms;
  std::vector<Tensor> access;
  for (std::size_t t = 0; t < episode.actions.size(); ++t) {
    StepOutput out = model.forward_step(tape, episode.obs[t], episode.agents[t], state);
    terms.push_back(ops::cross_entropy(tape, out.logits, static_cast<std::size_t>(episode.actions[t])));
    if (l2_access > 0.0 && out.interface_raw.defined()) access.push_back(ops::sum_squares(tape, out.interface_raw));
    state = std::move(out.state);
  }
  Tensor loss = ops::scale(tape, ops::sum(tape, ops::concat(tape, terms)), 1.0 / static_cast<double>(terms.size()));
  if (!access.empty()) {
    loss = ops::add(tape, loss, ops::scale(tape, ops::sum(tape, ops::concat(tape, access)), l2_access));
  }
  return loss;
}

namespace {

std::size_t argmax(const Tensor& logits) {
  auto d = logits.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::vector<Scenario> filtered(const DataConfig& data, std::size_t count, std::uint64_t seed, bool want_test) {
  std::vector<Scenario> out;
  if (count == 0) return out;
  if (want_test && data.test_percent <= 0) return out;
  if (!want_test && data.test_percent >= 100) return out;
  const Rng root = Rng(seed).split(want_test ? "held-out" : "train");
  const std::size_t limit = 1000 * count;
  for (std::size_t i = 0; out.size() < count && i < limit; ++i) {
    Scenario s = make_scenario(data, root.split(static_cast<std::uint64_t>(i)).next());
    if (s.is_test(data.test_percent) == want_test) out.push_back(std::move(s));
  }
  return out;
}

std::vector<EpisodeSample> demonstrate_all(const std::vector<Scenario>& scenarios) {
  std::vector<EpisodeSample> out;
  out.reserve(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) out.push_back(demonstrate(scenarios[i], i));
  return out;
}

void save_model(const Model& model, const std::filesystem::path& dir) {
  save_checkpoint(dir / "checkpoint.bin", model.params());
  std::ofstream(dir / "model.json", std::ios::trunc) << to_json(model.config()) << '\n';
}

}  // namespace

double test_error(const Model& model, const std::vector<EpisodeSample>& episodes, int jobs) {
  std::vector<std::size_t> wrong(episodes.size(), 0);
  std::size_t total = 0;
  for (const auto& e : episodes) total += e.actions.size();
  if (total == 0) return 0.0;
  parallel_over(model, episodes.size(), jobs, [&](const Model& m, std::size_t i) {
    Tape tape(false);
    ModelState state = m.init_state();
    const auto& e = episodes[i];
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      StepOutput out = m.forward_step(tape, e.obs[t], e.agents[t], state);
      if (argmax(out.logits) != static_cast<std::size_t>(e.actions[t])) ++wrong[i];
      state = std::move(out.state);
    }
  });
  return static_cast<double>(std::accumulate(wrong.begin(), wrong.end(), std::size_t{0})) /
         static_cast<double>(total);
}

std::vector<Scenario> held_out_scenarios(const DataConfig& data, std::size_t count, std::uint64_t seed) {
  return filtered(data, count, seed, true);
}

std::vector<Scenario> training_scenarios(const DataConfig& data, std::size_t count, std::uint64_t seed) {
  return filtered(data, count, seed, false);
}

std::vector<Scenario> curriculum_scenarios(const DataConfig& data, const TrainConfig& config, int level) {
  DataConfig d = data;
  d.level = level;
  return training_scenarios(d, config.train_worlds, Rng(config.seed).split("train").split(static_cast<std::uint64_t>(level)).seed());
}

TrainReport train(Model& model, const DataConfig& data, const TrainConfig& config,
                  const std::filesystem::path& out_dir, const EpochCallback& on_epoch) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Rng root = Rng(config.seed).split("train");
  RmsProp optimizer(config.learning_rate, config.decay, config.epsilon);
  TrainReport report;

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "train_log.csv", std::ios::trunc);
    log << "epoch,train_loss,test_error,curriculum_level,wall_seconds\n";
    report.checkpoint = out_dir / "checkpoint.bin";
  }

  int level = -1;
  std::vector<EpisodeSample> train_set, test_set;
  auto load_level = [&](int lvl) {
    DataConfig d = data;
    d.level = lvl;
    const auto lvl_seed = root.split(static_cast<std::uint64_t>(lvl)).seed();
    train_set = demonstrate_all(curriculum_scenarios(data, config, lvl));
    test_set = demonstrate_all(held_out_scenarios(d, config.test_worlds, lvl_seed));
    level = lvl;
  };

  auto level_at = [&](int epoch) { return config.schedule.empty() ? data.level : curriculum_next(level, epoch, config.schedule); };
  load_level(level_at(0));
  report.initial_test_error = test_error(model, test_set, config.jobs);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const int next_level = level_at(epoch - 1);
    if (next_level != level) load_level(next_level);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) {
      Rng rng = root.split("shuffle").split(static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)))]);
      }
    }

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      Tape tape;
      model.params().zero_grad();
      Tensor loss = loss_episode(tape, model, train_set[idx], config.l2_access);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        if (!out_dir.empty()) save_model(model, out_dir);
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", episode " +
                               std::to_string(train_set[idx].episode) + "; last good parameters kept");
      }
      tape.backward(loss);
      const double norm = model.params().grad_norm();
      if (!std::isfinite(norm)) {
        if (!out_dir.empty()) save_model(model, out_dir);
        throw TrainingDiverged("non-finite gradient at epoch " + std::to_string(epoch) + "; last good parameters kept");
      }
      if (norm > config.clip_norm) model.params().scale_grad(config.clip_norm / norm);
      optimizer.step(model.params());
      loss_sum += value;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = train_set.empty() ? 0.0 : loss_sum / static_cast<double>(train_set.size());
    entry.test_error = test_error(model, test_set, config.jobs);
    entry.curriculum_level = level;
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(entry);
    if (log.is_open()) {
      log << entry.epoch << ',' << std::setprecision(9) << entry.train_loss << ',' << entry.test_error << ','
          << entry.curriculum_level << ',' << std::setprecision(4) << entry.wall_seconds << '\n';
      log.flush();
      save_model(model, out_dir);
    }
    if (on_epoch && !on_epoch(entry)) break;
  }
  if (!out_dir.empty() && config.epochs == 0) save_model(model, out_dir);
  return report;
}

}  // namespace macn
