#pragma once

#include <string>
#include <vector>

#include "macn/ops.hpp"

namespace macn {

struct MemoryConfig {
  std::size_t slots = 32;      // N
  std::size_t word_size = 8;   // W
  std::size_t read_heads = 4;  // R; one write head

  void validate() const;
  // Raw controller outputs consumed by split_interface.
  std::size_t interface_size() const;
};

// Addressing state. Weightings and read vectors are kept per read head.
struct MemoryState {
  Tensor memory;      // N x W
  Tensor usage;       // N
  Tensor precedence;  // N
  Tensor link;        // N x N
  Tensor write_weights;               // N
  std::vector<Tensor> read_weights;   // R x [N]
  std::vector<Tensor> read_vectors;   // R x [W]
};

MemoryState initial_memory_state(const MemoryConfig& config);

// Squashed interface emitted by the controller.
struct InterfaceVector {
  std::vector<Tensor> read_keys;       // R x [W]
  std::vector<Tensor> read_strengths;  // R x [1], >= 1
  Tensor write_key;                    // W
  Tensor write_strength;               // 1, >= 1
  Tensor erase;                        // W, in (0, 1)
  Tensor write_vector;                 // W
  std::vector<Tensor> free_gates;      // R x [1]
  Tensor allocation_gate;              // 1
  Tensor write_gate;                   // 1
  std::vector<Tensor> read_modes;      // R x [3]: backward, content, forward
};

// Slices a raw controller output laid out as
//   read keys (R*W) | read strengths (R) | write key (W) | write strength (1) |
//   erase (W) | write vector (W) | free gates (R) | allocation gate (1) |
//   write gate (1) | read modes (3R)
// and applies oneplus / sigmoid / softmax to the respective segments.
InterfaceVector split_interface(Tape& tape, const Tensor& raw, const MemoryConfig& config);

// softmax_i(strength * cosine(M[i], key)); the cosine denominator is floored at 1e-6.
Tensor content_weighting(Tape& tape, const Tensor& memory, const Tensor& key, const Tensor& strength);

// Allocation weighting for a usage vector: slots sorted by ascending usage
// (stable), a[phi_j] = (1 - u[phi_j]) * prod_{l<j} u[phi_l]. The sort
// permutation is treated as a constant when differentiating.
Tensor allocation_weighting(Tape& tape, const Tensor& usage);

struct UsageAllocation {
  Tensor usage;
  Tensor allocation;
};

// Retention psi = prod_i (1 - f_i w_read_i); u' = (u + w - u*w) * psi.
UsageAllocation usage_allocation_update(Tape& tape, const MemoryState& state, const std::vector<Tensor>& free_gates);

// L'[i,j] = (1 - w_i - w_j) L[i,j] + w_i p[j] with p the previous precedence; zero diagonal.
Tensor link_update(Tape& tape, const Tensor& link, const Tensor& write_weights, const Tensor& precedence);

// Erase/write with a given weighting, then precedence and link updates.
MemoryState apply_write(Tape& tape, const MemoryState& state, const Tensor& write_weights, const Tensor& erase,
                        const Tensor& write_vector);

// Usage/allocation, write weighting, erase/write, link and precedence.
MemoryState write_step(Tape& tape, const MemoryState& state, const InterfaceVector& iface);

// Read weightings from the backward / content / forward modes and the read
// vectors M^T w for every head.
MemoryState read_step(Tape& tape, const MemoryState& state, const InterfaceVector& iface);

// write_step followed by read_step.
MemoryState memory_tick(Tape& tape, const MemoryState& state, const InterfaceVector& iface);

// Human-readable list of violated state invariants (empty when valid).
std::vector<std::string> memory_invariant_violations(const MemoryState& state, double tolerance = 1e-6);

}  // namespace macn
