#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "anonact/nn/tensor.hpp"

namespace anonact::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  // First and second moment buffers for the adaptive optimizer.
  Tensor<T> moment1;
  Tensor<T> moment2;
};

// Named parameters in insertion order. Iteration order is stable and defines
// the on-disk order and the optimizer's update order.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value) {
    if (index_.contains(name)) throw ArgumentError("duplicate parameter name: " + name);
    Tensor<T> zeros(value.shape());
    index_.emplace(name, params_.size());
    params_.push_back(Parameter<T>{std::move(name), std::move(value), zeros, zeros, zeros});
    return params_.back();
  }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.contains(name); }

  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  Parameter<T>& get(const std::string& name) { return params_[index_of(name)]; }
  const Parameter<T>& get(const std::string& name) const { return params_[index_of(name)]; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(T{0});
  }

  void reset_moments() {
    for (auto& p : params_) {
      p.moment1.fill(T{0});
      p.moment2.fill(T{0});
    }
  }

  // Values only; gradients and moments start at zero in the copy.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

  bool same_values(const ParamStore& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (params_[i].name != other[i].name || !(params_[i].value == other[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment update with bias correction. The step counter lives here;
// the moment buffers live in the ParamStore.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  template <typename T>
  void step(ParamStore<T>& params);

  // Updates with an explicit learning rate, e.g. under a schedule.
  template <typename T>
  void step(ParamStore<T>& params, double learning_rate);

  std::uint64_t steps_taken() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
};

}  // namespace anonact::nn
