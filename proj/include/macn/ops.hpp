#pragma once

#include <vector>

#include "macn/tape.hpp"
#include "macn/tensor.hpp"

// Differentiable operations over Tensor. Every op computes its forward value
// eagerly and, when the tape is recording and an input is tracked, records a
// backward rule. Only the operations the planner/memory graph needs exist.
namespace macn::ops {

// Elementwise, identical shapes.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

// x * s where s holds a single value.
Tensor scale(Tape& tape, const Tensor& x, const Tensor& s);
Tensor scale(Tape& tape, const Tensor& x, double s);
// 1 - x
Tensor one_minus(Tape& tape, const Tensor& x);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
// 1 + log(1 + exp(x)); always >= 1.
Tensor oneplus(Tape& tape, const Tensor& x);
// Softmax over consecutive groups of `group` entries (group == 0 means the
// whole tensor).
Tensor softmax(Tape& tape, const Tensor& x, std::size_t group = 0);

Tensor sum(Tape& tape, const Tensor& x);
Tensor sum_squares(Tape& tape, const Tensor& x);

// A[m x n] x[n] -> [m]
Tensor matvec(Tape& tape, const Tensor& a, const Tensor& x);
// A[m x n]^T x[m] -> [n]
Tensor matvec_t(Tape& tape, const Tensor& a, const Tensor& x);
// W[out x in] x[in] + b[out]
Tensor linear(Tape& tape, const Tensor& w, const Tensor& x, const Tensor& b);
// a[m] b[n]^T -> [m x n]
Tensor outer(Tape& tape, const Tensor& a, const Tensor& b);

// Contiguous concatenation of the parts' data, reshaped to `shape`.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts, Shape shape);
// 1-D concatenation.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);
// Concatenates C_i x H x W tensors along the channel axis.
Tensor concat_channels(Tape& tape, const std::vector<Tensor>& parts);
Tensor slice(Tape& tape, const Tensor& x, std::size_t offset, std::size_t length);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// Same-padded, stride-1 2-D convolution with odd kernel sizes.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias);
// C x H x W -> 1 x H x W, gradient to the lowest argmax channel.
Tensor channel_max(Tape& tape, const Tensor& input);
// k x k window of a C x H x W tensor centred on (row, col), zero outside.
Tensor crop(Tape& tape, const Tensor& input, int row, int col, int k);

// -log softmax(logits)[label], a scalar.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t label);

struct LstmParams {
  Tensor weight;  // 4H x (D + H), gate blocks ordered input, forget, cell, output
  Tensor bias;    // 4H
};

struct LstmOutput {
  Tensor h;
  Tensor c;
};

LstmOutput lstm_step(Tape& tape, const Tensor& x, const Tensor& h, const Tensor& c,
                     const LstmParams& params);

}  // namespace macn::ops
