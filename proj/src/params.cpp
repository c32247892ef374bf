#include "macn/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace macn {

Tensor ParameterSet::add(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape), true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return add(name, t);
}

Tensor ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  value.set_tracked(true);
  entries_.push_back({name, value});
  return value;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw std::out_of_range("unknown parameter: " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    if (!e.value.has_grad()) continue;
    for (double g : e.value.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& e : entries_) {
    if (!e.value.has_grad()) continue;
    for (double& g : e.value.grad()) g *= factor;
  }
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, e.value.clone()});
  return out;
}

void RmsProp::step(ParameterSet& params) {
  const auto& entries = params.entries();
  if (acc_.empty()) {
    for (const auto& e : entries) acc_.emplace_back(e.value.size(), 0.0);
  }
  if (acc_.size() != entries.size()) throw std::logic_error("RmsProp: parameter set changed between steps");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor p = entries[k].value;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto v = p.data();
    auto& a = acc_[k];
    for (std::size_t i = 0; i < v.size(); ++i) {
      a[i] = decay_ * a[i] + (1.0 - decay_) * g[i] * g[i];
      v[i] -= lr_ * g[i] / (std::sqrt(a[i]) + epsilon_);
    }
  }
}

namespace {

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw CheckpointError("checkpoint truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterSet& params) {
  out.write("MACN", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& e : params.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) put<std::uint64_t>(out, d);
    for (double v : e.value.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, params);
}

ParameterSet read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MACN", 4) != 0) throw CheckpointError("bad checkpoint magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in);
  ParameterSet params;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CheckpointError("checkpoint truncated in name");
    const auto rank = get<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    Tensor t(shape, true);
    for (double& v : t.data()) v = static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(in)));
    params.add(name, t);
  }
  return params;
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  return read_checkpoint(in);
}

void assign_parameters(ParameterSet& params, const ParameterSet& loaded) {
  if (params.entries().size() != loaded.entries().size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(loaded.entries().size()) + " tensors, model expects " +
                          std::to_string(params.entries().size()));
  }
  for (std::size_t k = 0; k < params.entries().size(); ++k) {
    const auto& dst = params.entries()[k];
    const auto& src = loaded.entries()[k];
    if (dst.name != src.name || dst.value.shape() != src.value.shape()) {
      throw CheckpointError("checkpoint tensor " + src.name + shape_string(src.value.shape()) + " does not match " +
                            dst.name + shape_string(dst.value.shape()));
    }
    Tensor target = dst.value;
    std::copy(src.value.data().begin(), src.value.data().end(), target.data().begin());
  }
}

}  // namespace macn
