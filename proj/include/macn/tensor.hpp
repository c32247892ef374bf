#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace macn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Reference-counted n-dimensional array. Copies share storage; use clone()
// for an independent copy. The gradient buffer is allocated on first use.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool tracked = false);
  Tensor(Shape shape, std::vector<double> values, bool tracked = false);

  static Tensor scalar(double value, bool tracked = false);
  static Tensor vector(std::vector<double> values, bool tracked = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double& operator[](std::size_t i) { return impl_->data[i]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool tracked() const { return impl_ && impl_->tracked; }
  void set_tracked(bool tracked) { impl_->tracked = tracked; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Allocates a zero gradient if none is present. The gradient belongs to
  // the shared storage, so it is writable through any handle.
  std::span<double> grad() const;
  void zero_grad() const;

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool tracked = false;
  };
  std::shared_ptr<Impl> impl_;
};

}  // namespace macn
