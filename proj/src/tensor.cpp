#include "macn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace macn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, bool tracked) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  impl_->data.assign(shape_size(shape), 0.0);
  impl_->shape = std::move(shape);
  impl_->tracked = tracked;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool tracked)
    : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (values.size() != shape_size(shape)) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->tracked = tracked;
}

Tensor Tensor::scalar(double value, bool tracked) { return Tensor({1}, {value}, tracked); }

Tensor Tensor::vector(std::vector<double> values, bool tracked) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), tracked);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

std::span<double> Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor out;
  out.impl_ = std::make_shared<Impl>(*impl_);
  return out;
}

}  // namespace macn
