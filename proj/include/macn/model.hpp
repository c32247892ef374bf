#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "macn/memory.hpp"
#include "macn/params.hpp"
#include "macn/vi.hpp"
#include "macn/worlds.hpp"

namespace macn {

enum class Variant { Macn, MacnLstm, CnnMemory, VinOnly };

// CLI spellings: macn, macn-lstm, cnn-memory, vin.
std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::Macn;
  int height = 16;
  int width = 16;
  std::size_t hidden = 256;  // controller LSTM
  std::size_t actions = 4;
  bool centered_crops = false;  // anchor the V and feature crops at the image centre, not the agent
  MemoryConfig memory;
  VIConfig vi;

  void validate() const;
  // V crop + reward-layer crop + 2 coordinates + previous read vectors.
  std::size_t controller_input_size() const;
  // Size of the read-vector block fed back to the controller.
  std::size_t read_size() const;
  bool has_state() const { return variant != Variant::VinOnly; }
  bool has_memory() const { return variant == Variant::Macn || variant == Variant::CnnMemory; }
};

inline constexpr int kValueCrop = 7;
inline constexpr int kFeatureCrop = 3;

struct ModelState {
  Tensor h, c;         // controller
  MemoryState memory;  // Macn, CnnMemory
  Tensor mem_h, mem_c; // MacnLstm: the LSTM standing in for memory
};

// Everything a single tick produces; the extra fields feed the L2 term and
// activation export.
struct StepOutput {
  Tensor logits;
  ModelState state;
  Tensor interface_raw;  // undefined for variants without memory
  Tensor controller_out;
  Tensor value_crop;     // 7x7 crop of V (or of the CNN map)
};

// Allocates and initialises every parameter of the variant.
ParameterSet build_variant(const ModelConfig& config, std::uint64_t seed);

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  // Binds to existing parameters (e.g. a loaded checkpoint); names and shapes must match.
  Model(ModelConfig config, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  // Independent deep copy for another thread.
  Model clone() const;
  // Copy for another map size and VI depth; no parameter depends on either.
  Model resized(int height, int width, int iterations) const;

  ModelState init_state() const;

  // obs: 2 x H x W (sensed occupancy, reward map); agent: cell the crops are centred on.
  StepOutput forward_step(Tape& tape, const Tensor& obs, Cell agent, const ModelState& state) const;

 private:
  void bind();

  ModelConfig config_;
  ParameterSet params_;
  ViWeights vi_;
  Tensor cnn_w_[4], cnn_b_[4];
  ops::LstmParams controller_, memlstm_;
  Tensor interface_w_, interface_b_;
  Tensor output_w_, output_b_;
};

// Observation stack for the network: channel 0 the sensed occupancy z, channel 1
// the reward map (1 at the goal).
Tensor grid_obs_stack(const Observation& obs, Cell goal);
// Graph observation: adjacency row and goal reshaped into side x side images.
Tensor graph_obs_stack(const GraphObservation& obs, int nodes);
// Cell of a node in the reshaped graph image.
Cell graph_node_cell(int node, int nodes);

std::string to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace macn
