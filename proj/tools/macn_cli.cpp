#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "macn/checks.hpp"
#include "macn/experiment.hpp"
#include "macn/parallel.hpp"

namespace fs = std::filesystem;
using namespace macn;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> jobs;
  std::string checkpoint;
  std::string variant;
  std::size_t episode = 0;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = o.config.empty() ? parse_experiment("{}") : load_config(o.config);
  if (o.seed) c.seed = c.train.seed = *o.seed;
  if (!o.out.empty()) c.out = o.out;
  if (!o.variant.empty()) set_variant(c, parse_variant(o.variant));
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Model checkpoint_model(const Options& o, const ExperimentConfig& c) {
  if (o.checkpoint.empty()) throw CheckpointError("checkpoint not found: pass --checkpoint PATH");
  Model m = load_model(o.checkpoint, c.model);
  if (!o.variant.empty() && parse_variant(o.variant) != m.config().variant) {
    throw std::invalid_argument("--variant " + o.variant + " does not match the checkpoint (" +
                                variant_name(m.config().variant) + ")");
  }
  return m;
}

const Scenario& pick(const std::vector<Scenario>& scenarios, std::size_t episode) {
  if (episode >= scenarios.size()) {
    throw std::invalid_argument("--episode " + std::to_string(episode) + " out of range (" +
                                std::to_string(scenarios.size()) + " held-out worlds)");
  }
  return scenarios[episode];
}

int step_cap_for(const Scenario& sc) {
  return default_step_cap(sc.task, sc.grid.height(), static_cast<int>(expert_actions(sc).size()), sc.graph.nodes());
}

int gen_data(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const fs::path dir = c.out;
  const Dataset d = make_dataset(c.data, c.dataset_worlds, c.seed, effective_jobs(o.jobs.value_or(0)));
  write_dataset(d, dir);
  write_text(dir / "config.json", dump_experiment(c));
  std::cout << "wrote " << d.train.size() << " train / " << d.test.size() << " test episodes to " << dir.string()
            << '\n';
  return 0;
}

int train_cmd(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_text(dir / "config.json", dump_experiment(c));
  TrainConfig tc = c.train;
  tc.jobs = o.jobs.value_or(1);
  Model model(c.model, c.seed);
  std::cout << variant_name(c.model.variant) << ": " << model.params().count() << " parameters\n";
  const TrainReport r = train(model, c.data, tc, dir, [](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << " level " << e.curriculum_level << " loss " << e.train_loss << " test_error "
              << e.test_error << " (" << e.wall_seconds << " s)\n"
              << std::flush;
    return true;
  });
  std::cout << "checkpoint " << r.checkpoint.string() << '\n';
  return 0;
}

int eval_cmd(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Model model = checkpoint_model(o, c);
  const MetricsReport m = evaluate_experiment(model, c, o.jobs.value_or(0));
  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_text(dir / "metrics.json", to_json(m) + "\n");
  write_text(dir / "metrics.csv", to_csv(m));
  std::cout << to_json(m) << '\n';
  return 0;
}

int rollout_cmd(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Model model = checkpoint_model(o, c);
  const std::vector<Scenario> worlds = evaluation_scenarios(c);
  const Scenario& sc = pick(worlds, o.episode);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  std::ofstream out(dir / "trajectory.jsonl", std::ios::trunc);
  const RolloutResult r = rollout(model, sc, step_cap_for(sc), c.seed, [&](const StepRecord& s) {
    nlohmann::ordered_json line;
    line["step"] = s.step;
    if (sc.task == Task::Graph) {
      line["node"] = s.agent.row * graph_image_side(sc.graph.nodes()) + s.agent.col;
    } else {
      line["row"] = s.agent.row;
      line["col"] = s.agent.col;
    }
    line["action"] = s.action;
    line["logits"] = std::vector<double>(s.output.logits.data().begin(), s.output.logits.data().end());
    if (sc.task == Task::Tunnel) line["dead_end_visible"] = s.dead_end_visible;
    out << line.dump() << '\n';
  });
  nlohmann::ordered_json summary;
  summary["episode"] = o.episode;
  summary["outcome"] = outcome_name(r.outcome);
  summary["success"] = r.success;
  summary["steps"] = r.steps;
  summary["expert_steps"] = r.expert_steps;
  std::cout << summary.dump() << '\n';
  return 0;
}

int inspect_memory(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Model model = checkpoint_model(o, c);
  const std::vector<Scenario> worlds = evaluation_scenarios(c);
  const Scenario& sc = pick(worlds, o.episode);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  std::ofstream out(dir / "activations.csv", std::ios::trunc);
  export_activations(model, sc, step_cap_for(sc), out);
  std::cout << "wrote " << (dir / "activations.csv").string() << '\n';
  return 0;
}

int selftest(const Options& o) {
  int failed = 0;
  for (const auto& r : checks::run_all(o.seed.value_or(7))) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    if (!r.passed) ++failed;
  }
  if (failed) std::cerr << failed << " check(s) failed\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory augmented control network experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool checkpoint) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--jobs", o.jobs, "worker threads; 0 = all cores");
    sub->add_option("--variant", o.variant, "macn, macn-lstm, cnn-memory or vin")
        ->check(CLI::IsMember({"macn", "macn-lstm", "cnn-memory", "vin"}));
    if (checkpoint) sub->add_option("--checkpoint", o.checkpoint, "checkpoint.bin from train");
  };

  auto* gen = app.add_subcommand("gen-data", "generate expert demonstrations");
  common(gen, false);
  auto* tr = app.add_subcommand("train", "train a model");
  common(tr, false);
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on held-out worlds");
  common(ev, true);
  auto* ro = app.add_subcommand("rollout", "write one held-out trajectory as JSONL");
  common(ro, true);
  ro->add_option("--episode", o.episode, "index of the held-out world");
  auto* im = app.add_subcommand("inspect-memory", "export per-step memory activations as CSV");
  common(im, true);
  im->add_option("--episode", o.episode, "index of the held-out world");
  auto* st = app.add_subcommand("selftest", "run the property and invariant suites");
  st->add_option("--seed", o.seed, "suite seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(o);
    if (*tr) return train_cmd(o);
    if (*ev) return eval_cmd(o);
    if (*ro) return rollout_cmd(o);
    if (*im) return inspect_memory(o);
    if (*st) return selftest(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
