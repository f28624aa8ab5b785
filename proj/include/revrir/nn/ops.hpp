#pragma once

#include <span>
#include <vector>

#include "revrir/nn/tensor.hpp"
#include "revrir/rng.hpp"

namespace revrir::nn {

/// (n x k) * (k x m).
Tensor matmul(const Tensor& a, const Tensor& b);

/// x * W + b with x (n x in), W (in x out), b (out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);

/// Sum of element-wise products with a constant tensor; handy for building
/// scalar probes of vector-valued ops in gradient checks.
Tensor dot_const(const Tensor& x, std::span<const double> weights);

/// Rows are split into `groups` consecutive blocks of equal size; each block
/// is averaged to one output row.
Tensor mean_pool_rows(const Tensor& x, std::size_t groups);

/// Each row divided by its L2 norm.
Tensor l2_normalize_rows(const Tensor& x);

/// Inverted dropout: in training, zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate). Identity otherwise.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// Mean over rows of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Row-wise argmax of a 2-D tensor.
std::vector<int> argmax_rows(const Tensor& x);

}  // namespace revrir::nn
