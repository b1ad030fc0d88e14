#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "anonact/nn/tensor.hpp"

namespace anonact::nn {

// Numerically stable softmax along `axis` (max subtracted, left-to-right sum).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits, std::size_t axis);

// Row-wise layer normalization over the last dimension with affine gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T epsilon);

template <typename T>
struct CrossEntropyResult {
  T loss{};
  // d(loss)/d(logits); same shape as the logits.
  Tensor<T> grad_logits;
};

// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
template <typename T>
CrossEntropyResult<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

// ---- row kernels shared with the transformer --------------------------------

template <typename T>
void softmax_inplace(std::span<T> values);

// Normalizes `in` into `out`; writes the row mean and reciprocal std for backward.
template <typename T>
void layer_norm_row(std::span<const T> in, std::span<const T> gain, std::span<const T> bias,
                    T epsilon, std::span<T> out, T& mean, T& rstd);

// Accumulates into d_in, d_gain, d_bias.
template <typename T>
void layer_norm_row_backward(std::span<const T> in, std::span<const T> gain, T mean, T rstd,
                             std::span<const T> d_out, std::span<T> d_in, std::span<T> d_gain,
                             std::span<T> d_bias);

// tanh-approximated GELU.
template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

// out[n, m] (+)= in[n, k] * w[k, m] + bias[m]. `bias` may be empty.
template <typename T>
void matmul_rows(std::span<const T> in, std::span<const T> w, std::span<const T> bias,
                 std::size_t n, std::size_t k, std::size_t m, std::span<T> out);

// Backward of matmul_rows: accumulates d_in (if non-empty), d_w and d_bias.
template <typename T>
void matmul_rows_backward(std::span<const T> in, std::span<const T> w, std::span<const T> d_out,
                          std::size_t n, std::size_t k, std::size_t m, std::span<T> d_in,
                          std::span<T> d_w, std::span<T> d_bias);

}  // namespace anonact::nn
