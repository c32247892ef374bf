#include "macn/tape.hpp"

#include <algorithm>

namespace macn {

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->tracked(); });
}

bool Tape::wants(const std::vector<Tensor>& inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.tracked(); });
}

void Tape::record(Tensor output, BackwardFn fn) {
  output.set_tracked(true);
  records_.push_back({std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.tracked()) return;
  for (auto& r : records_) {
    auto g = r.output.grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
}

}  // namespace macn
