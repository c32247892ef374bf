#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "macn/rng.hpp"
#include "macn/tensor.hpp"

namespace macn {

// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  // Creates a tracked tensor initialised uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Tensor add(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add(const std::string& name, Tensor value);

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t count() const;  // total scalar parameters

  void zero_grad();
  // Global L2 norm of all gradients.
  double grad_norm() const;
  void scale_grad(double factor);
  // Deep copy, so that independent tapes never share storage.
  ParameterSet clone() const;

 private:
  std::vector<Entry> entries_;
};

// Running mean-square state of RMSProp.
class RmsProp {
 public:
  RmsProp(double learning_rate = 1e-4, double decay = 0.9, double epsilon = 1e-8)
      : lr_(learning_rate), decay_(decay), epsilon_(epsilon) {}

  void step(ParameterSet& params);
  double learning_rate() const { return lr_; }
  const std::vector<std::vector<double>>& accumulators() const { return acc_; }

 private:
  double lr_, decay_, epsilon_;
  std::vector<std::vector<double>> acc_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary checkpoint: "MACN", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rank, u64 dims, float32 values; all
// little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParameterSet& params);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
// Reads every tensor in the file. Values come back tracked.
ParameterSet read_checkpoint(std::istream& in);
ParameterSet load_checkpoint(const std::filesystem::path& path);
// Copies values of a loaded checkpoint into `params`; names and shapes must match.
void assign_parameters(ParameterSet& params, const ParameterSet& loaded);

}  // namespace macn
