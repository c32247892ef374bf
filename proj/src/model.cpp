#include "macn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace macn {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Macn: return "macn";
    case Variant::MacnLstm: return "macn-lstm";
    case Variant::CnnMemory: return "cnn-memory";
    case Variant::VinOnly: return "vin";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::Macn, Variant::MacnLstm, Variant::CnnMemory, Variant::VinOnly}) {
    if (variant_name(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "' (expected macn, macn-lstm, cnn-memory or vin)");
}

void ModelConfig::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("model height/width must be positive");
  if (hidden == 0) throw std::invalid_argument("controller hidden size must be positive");
  if (actions < 2) throw std::invalid_argument("model needs at least 2 actions");
  memory.validate();
  vi.validate();
}

std::size_t ModelConfig::read_size() const {
  if (variant == Variant::VinOnly) return 0;
  return memory.read_heads * memory.word_size;
}

std::size_t ModelConfig::controller_input_size() const {
  const std::size_t features = vi.reward_channels * kFeatureCrop * kFeatureCrop;
  return kValueCrop * kValueCrop + features + 2 + read_size();
}

ParameterSet build_variant(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParameterSet p;
  Rng rng = Rng(seed).split("model");
  const auto& vi = config.vi;
  if (config.variant == Variant::CnnMemory) {
    const std::size_t chans[5] = {2, vi.hidden_channels, vi.reward_channels, vi.reward_channels, 1};
    const std::size_t ks[4] = {3, 1, 3, 3};
    for (int l = 0; l < 4; ++l) {
      const std::string name = "cnn.c" + std::to_string(l + 1);
      const std::size_t fan = chans[l] * ks[l] * ks[l];
      p.add(name + ".weight", {chans[l + 1], chans[l], ks[l], ks[l]}, fan, rng);
      p.add(name + ".bias", {chans[l + 1]}, fan, rng);
    }
  } else {
    ViWeights::create(p, "vi.", vi, rng);
  }
  if (config.variant == Variant::VinOnly) {
    const std::size_t in = vi.q_channels * kFeatureCrop * kFeatureCrop;
    p.add("output.weight", {config.actions, in}, in, rng);
    p.add("output.bias", {config.actions}, in, rng);
    return p;
  }
  const std::size_t h = config.hidden, in = config.controller_input_size();
  p.add("controller.weight", {4 * h, in + h}, in + h, rng);
  p.add("controller.bias", {4 * h}, in + h, rng);
  if (config.has_memory()) {
    const std::size_t iface = config.memory.interface_size();
    p.add("interface.weight", {iface, h}, h, rng);
    p.add("interface.bias", {iface}, h, rng);
  } else {
    const std::size_t m = config.read_size();
    p.add("memlstm.weight", {4 * m, h + m}, h + m, rng);
    p.add("memlstm.bias", {4 * m}, h + m, rng);
  }
  const std::size_t out_in = h + config.read_size();
  p.add("output.weight", {config.actions, out_in}, out_in, rng);
  p.add("output.bias", {config.actions}, out_in, rng);
  return p;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  params_ = build_variant(config_, seed);
  bind();
}

Model::Model(ModelConfig config, ParameterSet params) : config_(std::move(config)) {
  params_ = build_variant(config_, 0);
  assign_parameters(params_, params);
  bind();
}

Model Model::clone() const { return Model(config_, params_.clone()); }

Model Model::resized(int height, int width, int iterations) const {
  ModelConfig c = config_;
  c.height = height;
  c.width = width;
  c.vi.iterations = iterations;
  return Model(c, params_.clone());
}

void Model::bind() {
  const auto& p = params_;
  if (config_.variant == Variant::CnnMemory) {
    for (int l = 0; l < 4; ++l) {
      const std::string name = "cnn.c" + std::to_string(l + 1);
      cnn_w_[l] = p.at(name + ".weight");
      cnn_b_[l] = p.at(name + ".bias");
    }
  } else {
    vi_ = ViWeights::bind(p, "vi.");
  }
  output_w_ = p.at("output.weight");
  output_b_ = p.at("output.bias");
  if (config_.variant == Variant::VinOnly) return;
  controller_ = {p.at("controller.weight"), p.at("controller.bias")};
  if (config_.has_memory()) {
    interface_w_ = p.at("interface.weight");
    interface_b_ = p.at("interface.bias");
  } else {
    memlstm_ = {p.at("memlstm.weight"), p.at("memlstm.bias")};
  }
}

ModelState Model::init_state() const {
  ModelState s;
  if (!config_.has_state()) return s;
  s.h = Tensor({config_.hidden});
  s.c = Tensor({config_.hidden});
  if (config_.has_memory()) {
    s.memory = initial_memory_state(config_.memory);
  } else {
    s.mem_h = Tensor({config_.read_size()});
    s.mem_c = Tensor({config_.read_size()});
  }
  return s;
}

namespace {

Tensor flat(Tape& tape, const Tensor& t) { return ops::reshape(tape, t, {t.size()}); }

Tensor coordinates(Cell agent, const ModelConfig& c) {
  const double r = c.height > 1 ? static_cast<double>(agent.row) / (c.height - 1) : 0.0;
  const double q = c.width > 1 ? static_cast<double>(agent.col) / (c.width - 1) : 0.0;
  return Tensor::vector({r, q});
}

}  // namespace

StepOutput Model::forward_step(Tape& tape, const Tensor& obs, Cell agent, const ModelState& state) const {
  const auto H = static_cast<std::size_t>(config_.height), W = static_cast<std::size_t>(config_.width);
  if (obs.shape() != Shape{2, H, W}) {
    throw ShapeError("forward_step: observation " + shape_string(obs.shape()) + " does not match model " +
                     shape_string({2, H, W}));
  }
  StepOutput out;
  const Cell anchor = config_.centered_crops ? Cell{config_.height / 2, config_.width / 2} : agent;
  Tensor value_map, features;
  if (config_.variant == Variant::CnnMemory) {
    Tensor x = ops::relu(tape, ops::conv2d(tape, obs, cnn_w_[0], cnn_b_[0]));
    features = ops::relu(tape, ops::conv2d(tape, x, cnn_w_[1], cnn_b_[1]));
    x = ops::relu(tape, ops::conv2d(tape, features, cnn_w_[2], cnn_b_[2]));
    value_map = ops::conv2d(tape, x, cnn_w_[3], cnn_b_[3]);
  } else {
    features = conv_feature_block(tape, obs, vi_);
    ValueMaps maps = vi_recurrence(tape, features, vi_, config_.vi);
    if (config_.variant == Variant::VinOnly) {
      out.value_crop = ops::crop(tape, maps.v, anchor.row, anchor.col, kValueCrop);
      Tensor q = flat(tape, ops::crop(tape, maps.q, anchor.row, anchor.col, kFeatureCrop));
      out.logits = ops::linear(tape, output_w_, q, output_b_);
      return out;
    }
    value_map = maps.v;
  }

  out.value_crop = ops::crop(tape, value_map, anchor.row, anchor.col, kValueCrop);
  Tensor low = flat(tape, ops::crop(tape, features, anchor.row, anchor.col, kFeatureCrop));
  Tensor prev_reads = config_.has_memory() ? ops::concat(tape, state.memory.read_vectors) : state.mem_h;
  Tensor input = ops::concat(tape, {flat(tape, out.value_crop), low, coordinates(agent, config_), prev_reads});

  ops::LstmOutput ctl = ops::lstm_step(tape, input, state.h, state.c, controller_);
  out.state.h = ctl.h;
  out.state.c = ctl.c;
  out.controller_out = ctl.h;
  Tensor reads;
  if (config_.has_memory()) {
    out.interface_raw = ops::linear(tape, interface_w_, ctl.h, interface_b_);
    InterfaceVector iface = split_interface(tape, out.interface_raw, config_.memory);
    out.state.memory = memory_tick(tape, state.memory, iface);
    reads = ops::concat(tape, out.state.memory.read_vectors);
  } else {
    ops::LstmOutput mem = ops::lstm_step(tape, ctl.h, state.mem_h, state.mem_c, memlstm_);
    out.state.mem_h = mem.h;
    out.state.mem_c = mem.c;
    reads = mem.h;
  }
  out.logits = ops::linear(tape, output_w_, ops::concat(tape, {ctl.h, reads}), output_b_);
  return out;
}

Tensor grid_obs_stack(const Observation& obs, Cell goal) {
  const auto h = static_cast<std::size_t>(obs.height), w = static_cast<std::size_t>(obs.width);
  Tensor t({2, h, w});
  auto d = t.data();
  for (std::size_t i = 0; i < h * w; ++i) d[i] = obs.z[i];
  d[h * w + static_cast<std::size_t>(goal.row) * w + static_cast<std::size_t>(goal.col)] = 1.0;
  return t;
}

namespace {

int graph_image_side_checked(int nodes) {
  if (nodes < 2) throw std::invalid_argument("graph needs at least 2 nodes");
  return graph_image_side(nodes);
}

}  // namespace

Cell graph_node_cell(int node, int nodes) {
  const int side = graph_image_side_checked(nodes);
  return {node / side, node % side};
}

Tensor graph_obs_stack(const GraphObservation& obs, int nodes) {
  const auto side = static_cast<std::size_t>(graph_image_side_checked(nodes));
  Tensor t({2, side, side});
  auto d = t.data();
  for (std::size_t i = 0; i < obs.row.size(); ++i) d[i] = obs.row[i];
  d[side * side + static_cast<std::size_t>(obs.goal)] = 1.0;
  return t;
}

std::string to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["variant"] = variant_name(c.variant);
  j["height"] = c.height;
  j["width"] = c.width;
  j["hidden"] = c.hidden;
  j["actions"] = c.actions;
  j["centered_crops"] = c.centered_crops;
  j["memory"] = {{"slots", c.memory.slots}, {"word_size", c.memory.word_size}, {"read_heads", c.memory.read_heads}};
  j["vi"] = {{"iterations", c.vi.iterations},
             {"hidden_channels", c.vi.hidden_channels},
             {"reward_channels", c.vi.reward_channels},
             {"q_channels", c.vi.q_channels}};
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.actions = j.at("actions").get<std::size_t>();
  c.centered_crops = j.value("centered_crops", false);
  const auto& m = j.at("memory");
  c.memory.slots = m.at("slots").get<std::size_t>();
  c.memory.word_size = m.at("word_size").get<std::size_t>();
  c.memory.read_heads = m.at("read_heads").get<std::size_t>();
  const auto& v = j.at("vi");
  c.vi.iterations = v.at("iterations").get<int>();
  c.vi.hidden_channels = v.at("hidden_channels").get<std::size_t>();
  c.vi.reward_channels = v.at("reward_channels").get<std::size_t>();
  c.vi.q_channels = v.at("q_channels").get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace macn
