#include "macn/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace macn {

using Json = nlohmann::ordered_json;

namespace {

void fail(const std::string& field, const std::string& message) { throw ConfigError(field + ": " + message); }

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) fail(field, message);
}

std::vector<CurriculumStep> default_schedule(Task task, int size) {
  if (task == Task::Tunnel) return {};
  if (task == Task::Graph) return {{0, 0}, {1, 4}, {2, 8}, {3, 12}};
  // obstacle caps stop growing once count and side reach their size limits
  int top = 0;
  while (top < 8 && (2 + 2 * (top + 1) <= std::max(2, size / 2) || 2 + (top + 1) <= std::max(2, size / 4))) ++top;
  std::vector<CurriculumStep> s;
  for (int level = 0; level <= top; ++level) s.push_back({level, 5 * level});
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(data.test_percent >= 0 && data.test_percent <= 100, "data.test_percent", "must be in [0, 100]");
  require(data.success_probability > 0.0 && data.success_probability <= 1.0, "data.success_probability",
          "must be in (0, 1]");
  require(data.level >= 0, "data.level", "must be >= 0");
  require(eval_worlds > 0, "eval_worlds", "must be > 0");
  if (data.task == Task::Graph) {
    require(data.nodes >= 2, "nodes", "must be >= 2");
    const int side = graph_image_side(data.nodes);
    require(model.actions == static_cast<std::size_t>(data.nodes), "model.actions",
            "graph task needs one action per node (" + std::to_string(data.nodes) + ")");
    require(model.height == side && model.width == side, "model", "graph image side must be " + std::to_string(side));
    require(step_cap == default_step_cap(Task::Graph, 0, 0, data.nodes), "step_cap",
            "graph task uses 2N = " + std::to_string(2 * data.nodes));
  } else {
    require(data.size >= 8, "size", "must be >= 8");
    require(model.actions == static_cast<std::size_t>(kGridActions), "model.actions", "grid tasks have 4 actions");
    require(model.height == data.size && model.width == data.size, "model",
            "map side must equal size " + std::to_string(data.size));
    const int cap = default_step_cap(data.task, data.size);
    require(step_cap == cap, "step_cap", "size " + std::to_string(data.size) + " uses cap " + std::to_string(cap));
    if (data.task == Task::Tunnel) {
      require(data.tunnel_length >= 2, "tunnel_length", "must be >= 2");
      require(data.size >= data.tunnel_length + 3, "tunnel_length", "map side must be at least length + 3");
      require(sweep.step > 0 && sweep.start_length >= 2 && sweep.max_length >= sweep.start_length, "sweep",
              "needs step > 0 and start_length <= max_length");
    }
  }
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    fail("config", e.what());
  }
}

ExperimentConfig default_experiment(Task task, int size, int nodes) {
  ExperimentConfig c;
  c.data.task = task;
  c.data.size = size;
  c.data.nodes = nodes;
  c.model.vi.iterations = default_iterations(size);
  if (task == Task::Graph) {
    const int side = graph_image_side(nodes);
    c.model.height = c.model.width = side;
    c.model.actions = static_cast<std::size_t>(nodes);
    c.model.vi.iterations = default_iterations(side);
    c.model.memory.read_heads = 1;
    c.model.centered_crops = true;
    c.step_cap = default_step_cap(task, 0, 0, nodes);
    c.data.level = 0;
  } else {
    c.model.height = c.model.width = size;
    c.step_cap = default_step_cap(task, size);
  }
  if (task == Task::Tunnel) {
    c.model.memory.read_heads = 1;
    c.train.l2_access = 1e-4;
  }
  c.train.schedule = default_schedule(task, size);
  c.train.epochs = task == Task::Grid ? 40 : 30;
  c.out = "runs/" + task_name(task);
  return c;
}

namespace {

// Tracks which keys of an object were consumed so the rest can be rejected.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "must be a JSON object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(field(key), "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(field(key), "expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        fail(field(key), "must be >= 0");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(field(key), "expected a number");
    } else {
      if (!v.is_string()) fail(field(key), "expected a string");
    }
    out = v.get<T>();
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  const Json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(field(key), "unknown key \"" + key + "\"");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_experiment(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  Reader top(j, "");
  std::string task = "grid";
  int size = 16, nodes = 9;
  top.get("task", task);
  top.get("size", size);
  top.get("nodes", nodes);
  Task t;
  try {
    t = parse_task(task);
  } catch (const std::invalid_argument&) {
    fail("task", "unknown task \"" + task + "\" (grid, tunnel, graph)");
  }
  require(nodes >= 2, "nodes", "must be >= 2");
  require(size >= 1, "size", "must be >= 1");
  ExperimentConfig c = default_experiment(t, size, nodes);

  top.get("tunnel_length", c.data.tunnel_length);
  top.get("seed", c.seed);
  top.get("out", c.out);
  top.get("step_cap", c.step_cap);
  top.get("dataset_worlds", c.dataset_worlds);
  top.get("eval_worlds", c.eval_worlds);

  Reader data = top.child("data");
  data.get("level", c.data.level);
  data.get("test_percent", c.data.test_percent);
  data.get("graph_seed", c.data.graph_seed);
  data.get("success_probability", c.data.success_probability);
  data.finish();

  Reader model = top.child("model");
  std::string variant = variant_name(c.model.variant);
  model.get("variant", variant);
  try {
    c.model.variant = parse_variant(variant);
  } catch (const std::invalid_argument&) {
    fail("model.variant", "unknown variant \"" + variant + "\" (macn, macn-lstm, cnn-memory, vin)");
  }
  model.get("hidden", c.model.hidden);
  model.get("centered_crops", c.model.centered_crops);
  model.get("iterations", c.model.vi.iterations);
  model.get("vi_hidden_channels", c.model.vi.hidden_channels);
  model.get("slots", c.model.memory.slots);
  model.get("word_size", c.model.memory.word_size);
  model.get("read_heads", c.model.memory.read_heads);
  model.finish();

  Reader train = top.child("train");
  train.get("epochs", c.train.epochs);
  train.get("train_worlds", c.train.train_worlds);
  train.get("test_worlds", c.train.test_worlds);
  train.get("learning_rate", c.train.learning_rate);
  train.get("decay", c.train.decay);
  train.get("epsilon", c.train.epsilon);
  train.get("l2_access", c.train.l2_access);
  train.get("clip_norm", c.train.clip_norm);
  train.get("shuffle", c.train.shuffle);
  if (const Json* s = train.raw("schedule")) {
    require(s->is_array(), "train.schedule", "expected a list of [level, epoch] pairs");
    c.train.schedule.clear();
    for (const auto& step : *s) {
      require(step.is_array() && step.size() == 2 && step[0].is_number_integer() && step[1].is_number_integer(),
              "train.schedule", "expected a list of [level, epoch] pairs");
      c.train.schedule.push_back({step[0].get<int>(), step[1].get<int>()});
    }
  }
  train.finish();

  Reader sweep = top.child("sweep");
  sweep.get("start_length", c.sweep.start_length);
  sweep.get("step", c.sweep.step);
  sweep.get("max_length", c.sweep.max_length);
  sweep.get("worlds", c.sweep.worlds);
  sweep.get("threshold", c.sweep.threshold);
  sweep.finish();

  top.finish();
  c.train.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment(text.str());
}

std::string dump_experiment(const ExperimentConfig& c) {
  Json j;
  j["task"] = task_name(c.data.task);
  j["size"] = c.data.size;
  j["tunnel_length"] = c.data.tunnel_length;
  j["nodes"] = c.data.nodes;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["step_cap"] = c.step_cap;
  j["dataset_worlds"] = c.dataset_worlds;
  j["eval_worlds"] = c.eval_worlds;
  j["data"] = {{"level", c.data.level},
               {"test_percent", c.data.test_percent},
               {"graph_seed", c.data.graph_seed},
               {"success_probability", c.data.success_probability}};
  j["model"] = {{"variant", variant_name(c.model.variant)},
                {"hidden", c.model.hidden},
                {"centered_crops", c.model.centered_crops},
                {"iterations", c.model.vi.iterations},
                {"vi_hidden_channels", c.model.vi.hidden_channels},
                {"slots", c.model.memory.slots},
                {"word_size", c.model.memory.word_size},
                {"read_heads", c.model.memory.read_heads}};
  Json schedule = Json::array();
  for (const auto& s : c.train.schedule) schedule.push_back({s.level, s.epoch});
  j["train"] = {{"epochs", c.train.epochs},
                {"train_worlds", c.train.train_worlds},
                {"test_worlds", c.train.test_worlds},
                {"learning_rate", c.train.learning_rate},
                {"decay", c.train.decay},
                {"epsilon", c.train.epsilon},
                {"schedule", schedule},
                {"l2_access", c.train.l2_access},
                {"clip_norm", c.train.clip_norm},
                {"shuffle", c.train.shuffle}};
  j["sweep"] = {{"start_length", c.sweep.start_length},
                {"step", c.sweep.step},
                {"max_length", c.sweep.max_length},
                {"worlds", c.sweep.worlds},
                {"threshold", c.sweep.threshold}};
  return j.dump(2) + "\n";
}

void set_variant(ExperimentConfig& config, Variant variant) {
  config.model.variant = variant;
  config.validate();
}

Model load_model(const std::filesystem::path& checkpoint, const ModelConfig& fallback) {
  if (!std::filesystem::is_regular_file(checkpoint)) {
    throw CheckpointError("checkpoint not found: " + checkpoint.string());
  }
  ModelConfig mc = fallback;
  const auto sidecar = checkpoint.parent_path() / "model.json";
  if (std::filesystem::is_regular_file(sidecar)) {
    std::ifstream in(sidecar);
    std::ostringstream text;
    text << in.rdbuf();
    mc = model_config_from_json(text.str());
  }
  return Model(mc, load_checkpoint(checkpoint));
}

std::vector<Scenario> evaluation_scenarios(const ExperimentConfig& config) {
  return held_out_scenarios(config.data, config.eval_worlds, Rng(config.seed).split("eval").seed());
}

MetricsReport evaluate_experiment(const Model& model, const ExperimentConfig& config, int jobs) {
  const std::vector<Scenario> scenarios = evaluation_scenarios(config);
  if (scenarios.empty()) throw std::runtime_error("evaluate: no held-out worlds (test_percent is 0?)");
  MetricsReport report = compute_metrics(rollout_all(model, scenarios, jobs, config.seed));
  std::vector<EpisodeSample> demos;
  for (std::size_t i = 0; i < scenarios.size(); ++i) demos.push_back(demonstrate(scenarios[i], i));
  report.test_error = test_error(model, demos, jobs);
  if (config.data.task == Task::Tunnel) {
    const MetricsReport sweep = tunnel_sweep(model, config.data, config.sweep, config.seed, jobs);
    report.sweep = sweep.sweep;
    report.max_generalization_length = sweep.max_generalization_length;
  }
  return report;
}

}  // namespace macn
