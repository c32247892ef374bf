#pragma once

#include <string>
#include <vector>

#include "macn/ops.hpp"
#include "macn/params.hpp"
#include "macn/worlds.hpp"

namespace macn {

struct VIConfig {
  int iterations = 20;              // K
  std::size_t hidden_channels = 150;  // first 3x3 convolution
  std::size_t reward_channels = 4;    // 1x1 convolution -> reward layer R
  std::size_t q_channels = 4;
  double discount = 1.0;              // tabular oracle only

  void validate() const;
};

// K per map side: 20 for 16, 40 for 32, 60 for 64, linear in between.
int default_iterations(int map_size);

struct ValueMaps {
  Tensor q;  // q_channels x H x W
  Tensor v;  // 1 x H x W
  Tensor r;  // reward layer
};

// Weights of the convolutional feature block and the value-iteration loop.
// The recurrence kernel is shared by all K iterations.
struct ViWeights {
  Tensor hidden_weight, hidden_bias;  // hidden x 2 x 3 x 3
  Tensor reward_weight, reward_bias;  // reward x hidden x 1 x 1
  Tensor q0_weight, q0_bias;          // q x reward x 3 x 3
  Tensor q_weight, q_bias;            // q x (reward + 1) x 3 x 3

  static ViWeights create(ParameterSet& params, const std::string& prefix, const VIConfig& config, Rng& rng);
  static ViWeights bind(const ParameterSet& params, const std::string& prefix);
};

// obs (2 x H x W: sensed occupancy, reward map) -> reward layer R.
Tensor conv_feature_block(Tape& tape, const Tensor& obs, const ViWeights& weights);

// Q0 = conv(R); V0 = max_a Q0; K times: Q = conv([R; V]); V = max_a Q.
ValueMaps vi_recurrence(Tape& tape, const Tensor& reward, const ViWeights& weights, const VIConfig& config);

// Reward of taking `action` in `s`: 1 while at the goal, -1 for a blocked
// move (occupied or out of bounds), 0 otherwise.
double transition_reward(const GridWorld& world, Cell s, int action);

// V_{k+1}(s) = max_a [r(s,a) + gamma V_k(f(s,a))] from V_0 = 0, where
// blocked moves are self-loops. Row-major H x W.
std::vector<double> tabular_value_iteration(const GridWorld& world, double gamma, int iterations);

}  // namespace macn
