#pragma once

#include <functional>
#include <vector>

#include "macn/tensor.hpp"

namespace macn {

// Records differentiable operations in execution order and replays their
// backward rules in reverse. A tape and the tensors it records are owned by
// a single thread.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return recording_; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // True when an op over `inputs` must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  bool wants(const std::vector<Tensor>& inputs) const;

  // Marks `output` tracked and stores the rule that pushes output.grad()
  // into the inputs' gradients.
  void record(Tensor output, BackwardFn fn);

  // Propagates d(loss)/d(x) into every tracked tensor reachable from loss.
  // Gradients of leaf tensors accumulate; intermediate gradients are reset
  // at the start of every call so that repeated calls add exactly one more
  // copy of the gradient to the leaves.
  void backward(const Tensor& loss);

 private:
  struct Record {
    Tensor output;
    BackwardFn fn;
  };
  bool recording_;
  std::vector<Record> records_;
};

}  // namespace macn
