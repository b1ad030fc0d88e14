#pragma once

#include <cstdint>
#include <functional>

#include "anonact/nn/param_store.hpp"

namespace anonact::nn {

// Evaluates the loss at the current parameter values. When `with_grad` is
// set it must also overwrite every gradient accumulator with d(loss)/d(param).
using LossFunction = std::function<double(ParamStore<double>&, bool with_grad)>;

struct GradientCheckOptions {
  double step = 1e-4;
  std::size_t min_coordinates = 100;
  // Denominator floor: coordinates whose true gradient is structurally zero
  // (e.g. attention key biases) only carry finite-difference noise.
  double magnitude_floor = 1e-6;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

// Compares reverse-mode gradients with central finite differences on a seeded
// random subsample of coordinates (all of them if fewer than the minimum).
// Relative error per coordinate is |a - n| / max(|a|, |n|, magnitude_floor).
GradientCheckResult gradient_check(const LossFunction& loss, ParamStore<double>& params,
                                   std::uint64_t seed, GradientCheckOptions options = {});

}  // namespace anonact::nn
