#include <cmath>
#include <random>
#include <vector>

#include "anonact/model/transformer.hpp"
#include "anonact/nn/gradient_check.hpp"
#include "anonact/nn/ops.hpp"
#include "anonact/nn/param_store.hpp"
#include "doctest.h"

using namespace anonact;
using nn::Tensor;

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor<float>({2, 0}), ArgumentError);
  CHECK_THROWS_AS(Tensor<float>({2, 3}, std::vector<float>(5)), ArgumentError);
  Tensor<float> t({2, 3}, 1.5f);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
}

TEST_CASE("softmax of equal logits is uniform") {
  auto out = nn::softmax(Tensor<float>({4}, 0.0f), 0);
  for (float v : out.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("softmax is stable for large magnitudes") {
  auto out = nn::softmax(Tensor<float>({2}, {1000.0f, 0.0f}), 0);
  CHECK(std::abs(out[0] - 1.0f) <= 1e-6f);
  CHECK(std::abs(out[1]) <= 1e-6f);
}

TEST_CASE("softmax matches a long-double oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> logits(5);
    for (auto& v : logits) v = static_cast<float>(normal(rng));
    auto out = nn::softmax(Tensor<float>({5}, logits), 0);
    long double sum = 0;
    for (float v : logits) sum += std::exp(static_cast<long double>(v));
    for (std::size_t i = 0; i < 5; ++i) {
      const long double expected = std::exp(static_cast<long double>(logits[i])) / sum;
      CHECK(std::abs(static_cast<long double>(out[i]) - expected) <= 1e-6L);
    }
  }
}

TEST_CASE("softmax along an inner axis") {
  // shape [2, 3]; axis 0 normalizes each column.
  Tensor<double> x({2, 3}, {1, 2, 3, 1, 0, 5});
  auto out = nn::softmax(x, 0);
  for (std::size_t col = 0; col < 3; ++col) {
    CHECK(out.at(0, col) + out.at(1, col) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(out.at(0, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(nn::softmax(x, 2), ArgumentError);
}

TEST_CASE("softmax slices are non-negative and sum to one") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> dist(-50.0f, 50.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> v(3 * 7);
    for (auto& e : v) e = dist(rng);
    auto out = nn::softmax(Tensor<float>({3, 7}, v), 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0;
      for (float p : out.row(r)) {
        CHECK(p >= 0.0f);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("layer_norm edge cases") {
  Tensor<float> gain({4}, 1.0f), bias({4}, 0.0f);
  auto flat = nn::layer_norm(Tensor<float>({1, 4}, 3.0f), gain, bias, 1e-5f);
  for (float v : flat.data()) CHECK(v == 0.0f);

  Tensor<float> g2({2}, 1.0f), b2({2}, 0.0f);
  auto norm = nn::layer_norm(Tensor<float>({1, 2}, {-1.0f, 1.0f}), g2, b2, 1e-5f);
  CHECK(std::abs(norm[0] + 1.0f) <= 1e-5f);
  CHECK(std::abs(norm[1] - 1.0f) <= 1e-5f);

  CHECK_THROWS_AS(nn::layer_norm(Tensor<float>({1, 4}, 1.0f), g2, b2, 1e-5f), ArgumentError);
}

TEST_CASE("layer_norm output has zero mean and unit variance") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(2.0, 5.0);
  std::vector<double> v(4 * 32);
  for (auto& e : v) e = normal(rng);
  Tensor<double> gain({32}, 1.0), bias({32}, 0.0);
  auto out = nn::layer_norm(Tensor<double>({4, 32}, v), gain, bias, 1e-12);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (double e : out.row(r)) mean += e;
    mean /= 32;
    for (double e : out.row(r)) var += (e - mean) * (e - mean);
    var /= 32;
    CHECK(std::abs(mean) <= 1e-5);
    CHECK(std::abs(var - 1.0) <= 1e-5);
  }
}

TEST_CASE("cross_entropy analytic cases") {
  std::vector<int> target = {2};
  Tensor<float> forcing({1, 4}, {-1e4f, -1e4f, 0.0f, -1e4f});
  CHECK(std::abs(nn::cross_entropy(forcing, target).loss) <= 1e-6f);

  Tensor<float> uniform({1, 8}, 0.0f);
  CHECK(std::abs(nn::cross_entropy(uniform, target).loss - std::log(8.0f)) <= 1e-6f);

  std::vector<int> bad = {8};
  CHECK_THROWS_AS(nn::cross_entropy(uniform, bad), ArgumentError);
  std::vector<int> two = {0, 1};
  CHECK_THROWS_AS(nn::cross_entropy(uniform, two), ArgumentError);
}

TEST_CASE("cross_entropy matches a 64-bit oracle") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<float> logits(3 * 6);
  for (auto& v : logits) v = static_cast<float>(normal(rng));
  std::vector<int> targets = {1, 5, 0};
  auto result = nn::cross_entropy(Tensor<float>({3, 6}, logits), targets);
  double expected = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    double sum = 0;
    for (std::size_t v = 0; v < 6; ++v) sum += std::exp(static_cast<double>(logits[r * 6 + v]));
    expected += -(static_cast<double>(logits[r * 6 + targets[r]]) - std::log(sum));
  }
  expected /= 3;
  CHECK(std::abs(result.loss - expected) <= 1e-5);
}

TEST_CASE("gradient_check on a quadratic is exact") {
  nn::ParamStore<double> params;
  params.add("p", Tensor<double>({3, 50}, 0.0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  for (auto& v : params.get("p").value.data()) v = dist(rng);
  nn::LossFunction loss = [](nn::ParamStore<double>& ps, bool with_grad) {
    double total = 0;
    for (auto& p : ps) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        total += p.value[i] * p.value[i];
        if (with_grad) p.grad[i] = 2 * p.value[i];
      }
    }
    return total;
  };
  auto result = nn::gradient_check(loss, params, 7);
  CHECK(result.coordinates_checked == 100);
  CHECK(result.max_relative_error <= 1e-8);
}

TEST_CASE("gradient_check with no parameters reports zero error") {
  nn::ParamStore<double> params;
  nn::LossFunction loss = [](nn::ParamStore<double>&, bool) { return 1.0; };
  auto result = nn::gradient_check(loss, params, 0);
  CHECK(result.max_relative_error == 0.0);
  CHECK(result.coordinates_checked == 0);
}

TEST_CASE("gradient_check reports non-finite losses") {
  nn::ParamStore<double> params;
  params.add("p", Tensor<double>({2}, 1.0));
  nn::LossFunction loss = [](nn::ParamStore<double>&, bool) { return std::nan(""); };
  CHECK_THROWS_AS(nn::gradient_check(loss, params, 0), DiagnosticError);
}

TEST_CASE("param store rejects duplicate names and keeps shapes aligned") {
  nn::ParamStore<float> params;
  params.add("w", Tensor<float>({2, 2}, 1.0f));
  CHECK_THROWS_AS(params.add("w", Tensor<float>({1}, 0.0f)), ArgumentError);
  const auto& p = params.get("w");
  CHECK(p.grad.shape() == p.value.shape());
  CHECK(p.moment1.shape() == p.value.shape());
  CHECK(p.moment2.shape() == p.value.shape());
}

TEST_CASE("adam minimizes a quadratic") {
  nn::ParamStore<double> params;
  params.add("x", Tensor<double>({2}, {3.0, -2.0}));
  nn::Adam adam({.learning_rate = 0.1});
  for (int step = 0; step < 500; ++step) {
    auto& p = params.get("x");
    for (std::size_t i = 0; i < 2; ++i) p.grad[i] = 2 * p.value[i];
    adam.step(params);
  }
  CHECK(std::abs(params.get("x").value[0]) < 1e-2);
  CHECK(std::abs(params.get("x").value[1]) < 1e-2);
  CHECK(adam.steps_taken() == 500);
}

TEST_CASE("adam first step moves each coordinate by the learning rate") {
  nn::ParamStore<double> params;
  params.add("x", Tensor<double>({2}, {1.0, 1.0}));
  params.get("x").grad[0] = 0.5;
  params.get("x").grad[1] = -4.0;
  nn::Adam adam({.learning_rate = 0.01});
  adam.step(params);
  // Bias-corrected m/sqrt(v) = sign(g) on step one.
  CHECK(params.get("x").value[0] == doctest::Approx(0.99).epsilon(1e-7));
  CHECK(params.get("x").value[1] == doctest::Approx(1.01).epsilon(1e-7));
}

namespace {

model::ModelT<double> tiny_block_model(std::uint64_t seed) {
  model::ModelConfig cfg{.vocab_size = 7, .d_model = 8, .n_layers = 1, .n_heads = 2,
                         .context_len = 8, .seed = seed};
  model::ModelT<double> m(cfg);
  // Move every parameter off its special init (unit gains, zero biases).
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& p : m.params()) {
    for (auto& v : p.value.data()) v += normal(rng);
  }
  return m;
}

}  // namespace

TEST_CASE("transformer block gradients match finite differences") {
  auto m = tiny_block_model(21);
  const std::vector<int> tokens = {1, 4, 2, 6, 0, 3};
  const std::vector<int> targets = {4, 2, 6, 0, 3, 5};
  const std::vector<double> weights = {1, 1, 0, 2, 1, 1};
  nn::LossFunction loss = [&](nn::ParamStore<double>& ps, bool with_grad) {
    if (with_grad) {
      ps.zero_grad();
      return model::loss_and_grad<double>(m, tokens, targets, weights, 1.0);
    }
    return model::sequence_loss<double>(m, tokens, targets, weights);
  };
  auto result = nn::gradient_check(loss, m.params(), 99, {.step = 1e-4, .min_coordinates = 400});
  MESSAGE("max relative error " << result.max_relative_error);
  CHECK(result.coordinates_checked == 400);
  CHECK(result.max_relative_error <= 1e-4);
}

TEST_CASE("gradient ascent scale flips the gradient") {
  auto m = tiny_block_model(3);
  const std::vector<int> tokens = {1, 2, 3};
  const std::vector<int> targets = {2, 3, 4};
  const std::vector<double> weights = {1, 1, 1};
  m.params().zero_grad();
  model::loss_and_grad<double>(m, tokens, targets, weights, 1.0);
  auto forward_grad = m.params().get("head.w_out").grad;
  m.params().zero_grad();
  model::loss_and_grad<double>(m, tokens, targets, weights, -2.0);
  auto ascent_grad = m.params().get("head.w_out").grad;
  for (std::size_t i = 0; i < forward_grad.size(); ++i) {
    CHECK(ascent_grad[i] == doctest::Approx(-2.0 * forward_grad[i]));
  }
}
