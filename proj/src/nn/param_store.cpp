#include "anonact/nn/param_store.hpp"

#include <cmath>

namespace anonact::nn {

template <typename T>
void Adam::step(ParamStore<T>& params) {
  step(params, config_.learning_rate);
}

template <typename T>
void Adam::step(ParamStore<T>& params, double learning_rate) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
  const T lr = static_cast<T>(learning_rate);
  const T eps = static_cast<T>(config_.epsilon);
  for (auto& p : params) {
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto m = p.moment1.data();
    auto v = p.moment2.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * grad[i];
      v[i] = b2 * v[i] + (T{1} - b2) * grad[i] * grad[i];
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template void Adam::step<float>(ParamStore<float>&);
template void Adam::step<double>(ParamStore<double>&);
template void Adam::step<float>(ParamStore<float>&, double);
template void Adam::step<double>(ParamStore<double>&, double);

}  // namespace anonact::nn
