#include "anonact/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace anonact::nn {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
void softmax_inplace(std::span<T> values) {
  if (values.empty()) return;
  T max_value = values[0];
  for (T v : values) max_value = std::max(max_value, v);
  T sum = 0;
  for (T& v : values) {
    v = std::exp(v - max_value);
    sum += v;
  }
  for (T& v : values) v /= sum;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits, std::size_t axis) {
  if (axis >= logits.rank()) {
    throw ArgumentError("softmax axis " + std::to_string(axis) + " invalid for shape " +
                        shape_string(logits.shape()));
  }
  const auto& shape = logits.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];

  Tensor<T> out = logits;
  std::vector<T> scratch(len);
  auto data = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      for (std::size_t j = 0; j < len; ++j) scratch[j] = data[base + j * inner];
      softmax_inplace(std::span<T>(scratch));
      for (std::size_t j = 0; j < len; ++j) data[base + j * inner] = scratch[j];
    }
  }
  return out;
}

template <typename T>
void layer_norm_row(std::span<const T> in, std::span<const T> gain, std::span<const T> bias,
                    T epsilon, std::span<T> out, T& mean, T& rstd) {
  const std::size_t n = in.size();
  T sum = 0;
  for (T v : in) sum += v;
  mean = sum / static_cast<T>(n);
  T var = 0;
  for (T v : in) {
    const T d = v - mean;
    var += d * d;
  }
  var /= static_cast<T>(n);
  rstd = T{1} / std::sqrt(var + epsilon);
  for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - mean) * rstd * gain[i] + bias[i];
}

template <typename T>
void layer_norm_row_backward(std::span<const T> in, std::span<const T> gain, T mean, T rstd,
                             std::span<const T> d_out, std::span<T> d_in, std::span<T> d_gain,
                             std::span<T> d_bias) {
  const std::size_t n = in.size();
  // d_xhat = d_out * gain; d_in = rstd * (d_xhat - mean(d_xhat) - xhat * mean(d_xhat * xhat))
  T mean_dxhat = 0;
  T mean_dxhat_xhat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T xhat = (in[i] - mean) * rstd;
    const T dxhat = d_out[i] * gain[i];
    mean_dxhat += dxhat;
    mean_dxhat_xhat += dxhat * xhat;
    d_gain[i] += d_out[i] * xhat;
    d_bias[i] += d_out[i];
  }
  mean_dxhat /= static_cast<T>(n);
  mean_dxhat_xhat /= static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T xhat = (in[i] - mean) * rstd;
    const T dxhat = d_out[i] * gain[i];
    d_in[i] += rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
  }
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T epsilon) {
  const std::size_t width = x.cols();
  if (gain.size() != width || bias.size() != width) {
    throw ArgumentError("layer_norm gain/bias length must equal last dimension " +
                        std::to_string(width));
  }
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T mean{}, rstd{};
    layer_norm_row<T>(x.row(r), gain.data(), bias.data(), epsilon, out.row(r), mean, rstd);
  }
  return out;
}

template <typename T>
CrossEntropyResult<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  if (logits.rank() != 2 || logits.rows() != targets.size()) {
    throw ArgumentError("cross_entropy expects one logit row per target, got logits " +
                        shape_string(logits.shape()) + " and " + std::to_string(targets.size()) +
                        " targets");
  }
  const std::size_t vocab = logits.cols();
  CrossEntropyResult<T> result{T{0}, softmax(logits, 1)};
  const T scale = T{1} / static_cast<T>(targets.size());
  T total = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const int target = targets[r];
    if (target < 0 || static_cast<std::size_t>(target) >= vocab) {
      throw ArgumentError("cross_entropy target " + std::to_string(target) +
                          " outside vocabulary of size " + std::to_string(vocab));
    }
    auto row = logits.row(r);
    T max_value = row[0];
    for (T v : row) max_value = std::max(max_value, v);
    T sum = 0;
    for (T v : row) sum += std::exp(v - max_value);
    total += std::log(sum) + max_value - row[target];

    auto grad = result.grad_logits.row(r);
    grad[target] -= T{1};
    for (T& g : grad) g *= scale;
  }
  result.loss = total * scale;
  return result;
}

template <typename T>
T gelu(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T inner = k * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(inner));
}

template <typename T>
T gelu_grad(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);
  const T inner = k * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(inner);
  const T sech2 = T(1) - t * t;
  return T(0.5) * (T(1) + t) + T(0.5) * x * sech2 * k * (T(1) + T(3 * 0.044715) * x * x);
}

template <typename T>
void matmul_rows(std::span<const T> in, std::span<const T> w, std::span<const T> bias,
                 std::size_t n, std::size_t k, std::size_t m, std::span<T> out) {
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out.data() + i * m;
    if (!bias.empty()) {
      std::copy(bias.begin(), bias.end(), o);
    } else {
      std::fill(o, o + m, T{0});
    }
    const T* x = in.data() + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T a = x[kk];
      const T* wr = w.data() + kk * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += a * wr[j];
    }
  }
}

template <typename T>
void matmul_rows_backward(std::span<const T> in, std::span<const T> w, std::span<const T> d_out,
                          std::size_t n, std::size_t k, std::size_t m, std::span<T> d_in,
                          std::span<T> d_w, std::span<T> d_bias) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* g = d_out.data() + i * m;
    const T* x = in.data() + i * k;
    if (!d_bias.empty()) {
      for (std::size_t j = 0; j < m; ++j) d_bias[j] += g[j];
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T a = x[kk];
      T* dw = d_w.data() + kk * m;
      const T* wr = w.data() + kk * m;
      T acc = 0;
      for (std::size_t j = 0; j < m; ++j) {
        dw[j] += a * g[j];
        acc += g[j] * wr[j];
      }
      if (!d_in.empty()) d_in[i * k + kk] += acc;
    }
  }
}

#define ANONACT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template CrossEntropyResult<T> cross_entropy<T>(const Tensor<T>&, std::span<const int>);      \
  template void softmax_inplace<T>(std::span<T>);                                               \
  template void layer_norm_row<T>(std::span<const T>, std::span<const T>, std::span<const T>,   \
                                  T, std::span<T>, T&, T&);                                     \
  template void layer_norm_row_backward<T>(std::span<const T>, std::span<const T>, T, T,        \
                                           std::span<const T>, std::span<T>, std::span<T>,      \
                                           std::span<T>);                                       \
  template T gelu<T>(T);                                                                        \
  template T gelu_grad<T>(T);                                                                   \
  template void matmul_rows<T>(std::span<const T>, std::span<const T>, std::span<const T>,      \
                               std::size_t, std::size_t, std::size_t, std::span<T>);            \
  template void matmul_rows_backward<T>(std::span<const T>, std::span<const T>,                 \
                                        std::span<const T>, std::size_t, std::size_t,           \
                                        std::size_t, std::span<T>, std::span<T>, std::span<T>);

ANONACT_INSTANTIATE_OPS(float)
ANONACT_INSTANTIATE_OPS(double)

}  // namespace anonact::nn
