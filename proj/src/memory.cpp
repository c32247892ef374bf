#include "macn/memory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace macn {

namespace {

constexpr double kCosineFloor = 1e-6;

Tensor ones(std::size_t n) { return Tensor({n}, std::vector<double>(n, 1.0)); }

}  // namespace

void MemoryConfig::validate() const {
  if (slots == 0 || word_size == 0 || read_heads == 0) {
    throw std::invalid_argument("memory slots, word size and read heads must be positive");
  }
}

std::size_t MemoryConfig::interface_size() const {
  const std::size_t r = read_heads, w = word_size;
  return r * w + r + w + 1 + w + w + r + 1 + 1 + 3 * r;
}

MemoryState initial_memory_state(const MemoryConfig& config) {
  config.validate();
  const std::size_t n = config.slots, w = config.word_size;
  MemoryState s;
  s.memory = Tensor({n, w});
  s.usage = Tensor({n});
  s.precedence = Tensor({n});
  s.link = Tensor({n, n});
  s.write_weights = Tensor({n});
  for (std::size_t i = 0; i < config.read_heads; ++i) {
    s.read_weights.emplace_back(Shape{n});
    s.read_vectors.emplace_back(Shape{w});
  }
  return s;
}

InterfaceVector split_interface(Tape& tape, const Tensor& raw, const MemoryConfig& config) {
  const std::size_t need = config.interface_size();
  if (raw.size() < need) {
    throw ShapeError("split_interface: controller output has " + std::to_string(raw.size()) + " entries, need " +
                     std::to_string(need));
  }
  const std::size_t r = config.read_heads, w = config.word_size;
  std::size_t at = 0;
  auto take = [&](std::size_t len) {
    Tensor t = ops::slice(tape, raw, at, len);
    at += len;
    return t;
  };
  InterfaceVector iv;
  for (std::size_t i = 0; i < r; ++i) iv.read_keys.push_back(take(w));
  for (std::size_t i = 0; i < r; ++i) iv.read_strengths.push_back(ops::oneplus(tape, take(1)));
  iv.write_key = take(w);
  iv.write_strength = ops::oneplus(tape, take(1));
  iv.erase = ops::sigmoid(tape, take(w));
  iv.write_vector = take(w);
  for (std::size_t i = 0; i < r; ++i) iv.free_gates.push_back(ops::sigmoid(tape, take(1)));
  iv.allocation_gate = ops::sigmoid(tape, take(1));
  iv.write_gate = ops::sigmoid(tape, take(1));
  for (std::size_t i = 0; i < r; ++i) iv.read_modes.push_back(ops::softmax(tape, take(3)));
  return iv;
}

Tensor content_weighting(Tape& tape, const Tensor& memory, const Tensor& key, const Tensor& strength) {
  if (memory.rank() != 2 || key.size() != memory.dim(1) || strength.size() != 1) {
    throw ShapeError("content_weighting: memory " + shape_string(memory.shape()) + ", key " +
                     shape_string(key.shape()) + ", strength " + shape_string(strength.shape()));
  }
  const std::size_t n = memory.dim(0), w = memory.dim(1);
  auto m = memory.data();
  auto k = key.data();
  const double beta = strength[0];

  double key_norm = 0.0;
  for (double v : k) key_norm += v * v;
  key_norm = std::sqrt(key_norm);

  std::vector<double> row_norm(n), denom(n), cosine(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      sq += m[i * w + j] * m[i * w + j];
      dot += m[i * w + j] * k[j];
    }
    row_norm[i] = std::sqrt(sq);
    denom[i] = std::max(row_norm[i] * key_norm, kCosineFloor);
    cosine[i] = dot / denom[i];
  }

  Tensor out({n});
  auto o = out.data();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, beta * cosine[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += (o[i] = std::exp(beta * cosine[i] - top));
  for (double& v : o) v /= z;

  if (tape.wants({&memory, &key, &strength})) {
    tape.record(out, [memory, key, strength, out, row_norm, denom, cosine, key_norm, n, w]() {
      auto g = out.grad();
      auto y = out.data();
      auto m = memory.data();
      auto k = key.data();
      const double beta = strength[0];
      double dot_gy = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot_gy += g[i] * y[i];
      std::vector<double> gs(n);
      for (std::size_t i = 0; i < n; ++i) gs[i] = y[i] * (g[i] - dot_gy);
      if (strength.tracked()) {
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) gb += gs[i] * cosine[i];
        strength.grad()[0] += gb;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double gc = beta * gs[i];
        if (gc == 0.0) continue;
        const bool floored = row_norm[i] * key_norm <= kCosineFloor;
        if (memory.tracked()) {
          auto gm = memory.grad();
          for (std::size_t j = 0; j < w; ++j) {
            double d = k[j] / denom[i];
            if (!floored) d -= cosine[i] * m[i * w + j] / (row_norm[i] * row_norm[i]);
            gm[i * w + j] += gc * d;
          }
        }
        if (key.tracked()) {
          auto gk = key.grad();
          for (std::size_t j = 0; j < w; ++j) {
            double d = m[i * w + j] / denom[i];
            if (!floored) d -= cosine[i] * k[j] / (key_norm * key_norm);
            gk[j] += gc * d;
          }
        }
      }
    });
  }
  return out;
}

Tensor allocation_weighting(Tape& tape, const Tensor& usage) {
  const std::size_t n = usage.size();
  auto u = usage.data();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });

  Tensor out({n});
  auto o = out.data();
  double prod = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t s = order[j];
    o[s] = (1.0 - u[s]) * prod;
    prod *= u[s];
  }

  if (tape.wants({&usage})) {
    tape.record(out, [usage, out, order, n]() {
      auto g = out.grad();
      auto u = usage.data();
      auto gu = usage.grad();
      // d a[phi_j] / d u[phi_m]: -prod_{l<j} for m == j, (1 - u[phi_j]) prod_{l<j, l != m} for m < j.
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t sj = order[j];
        const double gj = g[sj];
        if (gj == 0.0) continue;
        double prefix = 1.0;
        for (std::size_t l = 0; l < j; ++l) prefix *= u[order[l]];
        gu[sj] -= gj * prefix;
        for (std::size_t m = 0; m < j; ++m) {
          double others = 1.0;
          for (std::size_t l = 0; l < j; ++l) {
            if (l != m) others *= u[order[l]];
          }
          gu[order[m]] += gj * (1.0 - u[sj]) * others;
        }
      }
    });
  }
  return out;
}

UsageAllocation usage_allocation_update(Tape& tape, const MemoryState& state, const std::vector<Tensor>& free_gates) {
  if (free_gates.size() != state.read_weights.size()) {
    throw std::invalid_argument("usage_allocation_update: " + std::to_string(free_gates.size()) +
                                " free gates for " + std::to_string(state.read_weights.size()) + " read heads");
  }
  const Tensor& u = state.usage;
  const Tensor& w = state.write_weights;
  Tensor psi = ones(u.size());
  for (std::size_t i = 0; i < free_gates.size(); ++i) {
    psi = ops::mul(tape, psi, ops::one_minus(tape, ops::scale(tape, state.read_weights[i], free_gates[i])));
  }
  Tensor written = ops::sub(tape, ops::add(tape, u, w), ops::mul(tape, u, w));
  Tensor next = ops::mul(tape, written, psi);
  return {next, allocation_weighting(tape, next)};
}

Tensor link_update(Tape& tape, const Tensor& link, const Tensor& write_weights, const Tensor& precedence) {
  const std::size_t n = write_weights.size();
  if (link.shape() != Shape{n, n} || precedence.size() != n) {
    throw ShapeError("link_update: link " + shape_string(link.shape()) + ", weights " +
                     shape_string(write_weights.shape()) + ", precedence " + shape_string(precedence.shape()));
  }
  auto l = link.data();
  auto w = write_weights.data();
  auto p = precedence.data();
  Tensor out({n, n});
  auto o = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      o[i * n + j] = i == j ? 0.0 : (1.0 - w[i] - w[j]) * l[i * n + j] + w[i] * p[j];
    }
  }
  if (tape.wants({&link, &write_weights, &precedence})) {
    tape.record(out, [link, write_weights, precedence, out, n]() {
      auto g = out.grad();
      auto l = link.data();
      auto w = write_weights.data();
      auto p = precedence.data();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const double gij = g[i * n + j];
          if (link.tracked()) link.grad()[i * n + j] += gij * (1.0 - w[i] - w[j]);
          if (write_weights.tracked()) {
            auto gw = write_weights.grad();
            gw[i] += gij * (p[j] - l[i * n + j]);
            gw[j] -= gij * l[i * n + j];
          }
          if (precedence.tracked()) precedence.grad()[j] += gij * w[i];
        }
      }
    });
  }
  return out;
}

MemoryState apply_write(Tape& tape, const MemoryState& state, const Tensor& write_weights, const Tensor& erase,
                        const Tensor& write_vector) {
  MemoryState next = state;
  Tensor keep = ops::one_minus(tape, ops::outer(tape, write_weights, erase));
  next.memory = ops::add(tape, ops::mul(tape, state.memory, keep), ops::outer(tape, write_weights, write_vector));
  next.link = link_update(tape, state.link, write_weights, state.precedence);
  Tensor remaining = ops::one_minus(tape, ops::sum(tape, write_weights));
  next.precedence = ops::add(tape, ops::scale(tape, state.precedence, remaining), write_weights);
  next.write_weights = write_weights;
  return next;
}

MemoryState write_step(Tape& tape, const MemoryState& state, const InterfaceVector& iface) {
  UsageAllocation ua = usage_allocation_update(tape, state, iface.free_gates);
  Tensor content = content_weighting(tape, state.memory, iface.write_key, iface.write_strength);
  Tensor mixed = ops::add(tape, ops::scale(tape, ua.allocation, iface.allocation_gate),
                          ops::scale(tape, content, ops::one_minus(tape, iface.allocation_gate)));
  Tensor w = ops::scale(tape, mixed, iface.write_gate);
  MemoryState next = apply_write(tape, state, w, iface.erase, iface.write_vector);
  next.usage = ua.usage;
  return next;
}

MemoryState read_step(Tape& tape, const MemoryState& state, const InterfaceVector& iface) {
  const std::size_t heads = state.read_weights.size();
  if (iface.read_keys.size() != heads || iface.read_modes.size() != heads || iface.read_strengths.size() != heads) {
    throw std::invalid_argument("read_step: interface does not match " + std::to_string(heads) + " read heads");
  }
  MemoryState next = state;
  for (std::size_t i = 0; i < heads; ++i) {
    const Tensor& prev = state.read_weights[i];
    const Tensor& pi = iface.read_modes[i];
    Tensor backward = ops::matvec_t(tape, state.link, prev);
    Tensor forward = ops::matvec(tape, state.link, prev);
    Tensor content = content_weighting(tape, state.memory, iface.read_keys[i], iface.read_strengths[i]);
    Tensor w = ops::add(tape,
                        ops::add(tape, ops::scale(tape, backward, ops::slice(tape, pi, 0, 1)),
                                 ops::scale(tape, content, ops::slice(tape, pi, 1, 1))),
                        ops::scale(tape, forward, ops::slice(tape, pi, 2, 1)));
    next.read_weights[i] = w;
    next.read_vectors[i] = ops::matvec_t(tape, state.memory, w);
  }
  return next;
}

MemoryState memory_tick(Tape& tape, const MemoryState& state, const InterfaceVector& iface) {
  return read_step(tape, write_step(tape, state, iface), iface);
}

namespace {

void check_weighting(const Tensor& w, const std::string& name, double tol, std::vector<std::string>& out) {
  double total = 0.0;
  for (double v : w.data()) {
    if (!std::isfinite(v) || v < -tol) {
      out.push_back(name + " has entry " + std::to_string(v));
      return;
    }
    total += v;
  }
  if (total > 1.0 + tol) out.push_back(name + " sums to " + std::to_string(total));
}

}  // namespace

std::vector<std::string> memory_invariant_violations(const MemoryState& s, double tol) {
  std::vector<std::string> out;
  check_weighting(s.write_weights, "write weighting", tol, out);
  check_weighting(s.precedence, "precedence", tol, out);
  for (std::size_t i = 0; i < s.read_weights.size(); ++i) {
    check_weighting(s.read_weights[i], "read weighting " + std::to_string(i), tol, out);
  }
  for (double v : s.usage.data()) {
    if (!(v >= -tol && v <= 1.0 + tol)) {
      out.push_back("usage entry " + std::to_string(v) + " outside [0, 1]");
      break;
    }
  }
  const std::size_t n = s.usage.size();
  auto l = s.link.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (l[i * n + i] != 0.0) out.push_back("link diagonal " + std::to_string(i) + " is nonzero");
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (l[i * n + j] < -tol) out.push_back("negative link entry");
      row += l[i * n + j];
      col += l[j * n + i];
    }
    if (row > 1.0 + tol) out.push_back("link row " + std::to_string(i) + " sums to " + std::to_string(row));
    if (col > 1.0 + tol) out.push_back("link column " + std::to_string(i) + " sums to " + std::to_string(col));
  }
  for (double v : s.memory.data()) {
    if (!std::isfinite(v)) {
      out.push_back("memory holds a non-finite value");
      break;
    }
  }
  return out;
}

}  // namespace macn
