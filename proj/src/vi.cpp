#include "macn/vi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace macn {

void VIConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("VI iterations K must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("VI discount must lie in (0, 1]");
  if (hidden_channels == 0 || reward_channels == 0 || q_channels == 0) {
    throw std::invalid_argument("VI channel counts must be positive");
  }
}

int default_iterations(int map_size) {
  if (map_size <= 32) return std::max(1, static_cast<int>(std::lround(1.25 * map_size)));
  return 40 + static_cast<int>(std::lround((map_size - 32) * 20.0 / 32.0));
}

ViWeights ViWeights::create(ParameterSet& params, const std::string& prefix, const VIConfig& c, Rng& rng) {
  c.validate();
  params.add(prefix + "hidden.weight", {c.hidden_channels, 2, 3, 3}, 2 * 9, rng);
  params.add(prefix + "hidden.bias", {c.hidden_channels}, 2 * 9, rng);
  params.add(prefix + "reward.weight", {c.reward_channels, c.hidden_channels, 1, 1}, c.hidden_channels, rng);
  params.add(prefix + "reward.bias", {c.reward_channels}, c.hidden_channels, rng);
  params.add(prefix + "q0.weight", {c.q_channels, c.reward_channels, 3, 3}, c.reward_channels * 9, rng);
  params.add(prefix + "q0.bias", {c.q_channels}, c.reward_channels * 9, rng);
  params.add(prefix + "q.weight", {c.q_channels, c.reward_channels + 1, 3, 3}, (c.reward_channels + 1) * 9, rng);
  params.add(prefix + "q.bias", {c.q_channels}, (c.reward_channels + 1) * 9, rng);
  return bind(params, prefix);
}

ViWeights ViWeights::bind(const ParameterSet& params, const std::string& prefix) {
  return {params.at(prefix + "hidden.weight"), params.at(prefix + "hidden.bias"),
          params.at(prefix + "reward.weight"), params.at(prefix + "reward.bias"),
          params.at(prefix + "q0.weight"),     params.at(prefix + "q0.bias"),
          params.at(prefix + "q.weight"),      params.at(prefix + "q.bias")};
}

Tensor conv_feature_block(Tape& tape, const Tensor& obs, const ViWeights& w) {
  if (obs.rank() != 3 || obs.dim(0) != 2) {
    throw ShapeError("conv_feature_block: expected a 2 x H x W observation stack, got " + shape_string(obs.shape()));
  }
  Tensor hidden = ops::conv2d(tape, obs, w.hidden_weight, w.hidden_bias);
  return ops::conv2d(tape, hidden, w.reward_weight, w.reward_bias);
}

ValueMaps vi_recurrence(Tape& tape, const Tensor& reward, const ViWeights& w, const VIConfig& config) {
  if (config.iterations < 1) throw std::invalid_argument("vi_recurrence: K must be >= 1");
  Tensor q = ops::conv2d(tape, reward, w.q0_weight, w.q0_bias);
  Tensor v = ops::channel_max(tape, q);
  for (int k = 0; k < config.iterations; ++k) {
    q = ops::conv2d(tape, ops::concat_channels(tape, {reward, v}), w.q_weight, w.q_bias);
    v = ops::channel_max(tape, q);
  }
  return {q, v, reward};
}

double transition_reward(const GridWorld& world, Cell s, int action) {
  if (s == world.goal) return 1.0;
  return world.occupied(apply(s, action)) ? -1.0 : 0.0;
}

std::vector<double> tabular_value_iteration(const GridWorld& world, double gamma, int iterations) {
  const std::size_t n = world.cell_count();
  std::vector<double> v(n, 0.0), next(n, 0.0);
  for (int k = 0; k < iterations; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const Cell s = world.cell(i);
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kGridActions; ++a) {
        const Cell t = apply(s, a);
        const Cell landed = world.occupied(t) ? s : t;
        best = std::max(best, transition_reward(world, s, a) + gamma * v[world.index(landed)]);
      }
      next[i] = best;
    }
    std::swap(v, next);
  }
  return v;
}

}  // namespace macn
