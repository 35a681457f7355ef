#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trg/tensor.hpp"

namespace trg {

class CounterRng;

// Elementwise ops require identical shapes; use expand() to broadcast explicitly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);

Tensor exp(const Tensor& x);
/// log(x + eps)
Tensor log(const Tensor& x, double eps = 0.0);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor relu(const Tensor& x);
/// Exact (erf) GeLU.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduces `axis` away (no keepdim).
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor max_all(const Tensor& x);
Tensor min_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor transpose(const Tensor& x);
/// Broadcasts size-1 or missing leading dims of `x` up to `shape` (trailing alignment).
Tensor expand(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

/// [m,k] x [k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [b,m,k] x [b,k,n]
Tensor bmm(const Tensor& a, const Tensor& b);

/// 1x1 convolution over the leading (channel) axis: x [Cin, ...], w [Cout, Cin], bias [Cout].
/// An empty bias (rank 0 default tensor with requires_grad false) is allowed via conv1x1(x, w).
Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor conv1x1(const Tensor& x, const Tensor& w);
/// Zero-padded "same" temporal convolution: x [Cin, T], w [Cout, Cin, k] (k odd), bias [Cout].
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t dilation);

/// Row-wise pairwise Euclidean distances of x [n, d] -> [n, n]. The gradient at a zero
/// distance is taken as 0.
Tensor pairwise_l2(const Tensor& x);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Normalizes over every axis except the leading channel axis. Training mode uses the
/// batch statistics and updates the running ones; eval mode uses the running statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training);

/// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, CounterRng& rng, bool training);

}  // namespace trg
