#include "anonact/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "anonact/errors.hpp"

namespace anonact::nn {

namespace {

double finite_or_throw(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw DiagnosticError(std::string("gradient_check: non-finite loss during ") + what);
  }
  return value;
}

}  // namespace

GradientCheckResult gradient_check(const LossFunction& loss, ParamStore<double>& params,
                                   std::uint64_t seed, GradientCheckOptions options) {
  GradientCheckResult result;
  const std::size_t total = params.total_elements();
  if (total == 0) return result;

  params.zero_grad();
  finite_or_throw(loss(params, true), "reverse pass");

  // Flattened (parameter, offset) coordinates, then a seeded subsample.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  coords.reserve(total);
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value.size(); ++i) coords.emplace_back(p, i);
  }
  std::vector<double> analytic;
  analytic.reserve(total);
  for (auto [p, i] : coords) analytic.push_back(params[p].grad[i]);

  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (coords.size() > options.min_coordinates) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(options.min_coordinates);
    std::sort(order.begin(), order.end());
  }

  const double h = options.step;
  for (std::size_t idx : order) {
    auto [p, i] = coords[idx];
    double& value = params[p].value[i];
    const double saved = value;
    value = saved + h;
    const double plus = finite_or_throw(loss(params, false), "finite difference");
    value = saved - h;
    const double minus = finite_or_throw(loss(params, false), "finite difference");
    value = saved;

    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
    const double err = std::abs(a - numeric) / denom;
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace anonact::nn
