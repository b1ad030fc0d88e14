#include <cmath>
#include <filesystem>
#include <random>

#include "anonact/errors.hpp"
#include "anonact/sample/sample.hpp"
#include "doctest.h"

using namespace anonact;
using sample::DecodeConfig;

namespace {

corpus::Vocab toy_vocab() {
  return corpus::Vocab::build(std::vector<std::string>{"a b c d e f g h ."});
}

model::Model random_model(std::size_t vocab, std::uint64_t seed, std::size_t context = 24) {
  model::ModelConfig cfg{.vocab_size = vocab, .d_model = 16, .n_layers = 3, .n_heads = 2,
                         .context_len = context, .seed = seed};
  model::Model m(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 0.3f);
  for (auto& p : m.params()) {
    for (auto& v : p.value.data()) v += normal(rng);
  }
  return m;
}

// Logits equal head.b_out regardless of input.
model::Model fixed_logit_model(const std::vector<float>& logits) {
  model::ModelConfig cfg{.vocab_size = logits.size(), .d_model = 4, .n_layers = 1, .n_heads = 1,
                         .context_len = 4, .seed = 0};
  model::Model m(cfg);
  for (auto& p : m.params()) p.value.fill(0.0f);
  auto b = m.params().get("head.b_out").value.data();
  std::copy(logits.begin(), logits.end(), b.begin());
  return m;
}

model::InjectionPlan random_plan(std::size_t layer, std::uint64_t seed, double coef) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  model::InjectionPlan plan;
  plan.coefficient = coef;
  plan.vectors[layer].resize(16);
  for (auto& v : plan.vectors[layer]) v = normal(rng);
  return plan;
}

DecodeConfig config(const corpus::Vocab& vocab, std::size_t samples, std::uint64_t seed) {
  DecodeConfig cfg;
  cfg.samples = samples;
  cfg.top_k = 5;
  cfg.max_tokens = 6;
  cfg.stop_tokens = sample::default_stop_tokens(vocab);
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("decode config validation") {
  DecodeConfig cfg;
  CHECK_NOTHROW(cfg.validate(100));
  CHECK_THROWS_AS(cfg.validate(10), ArgumentError);  // top_k 40 > vocab
  cfg.top_k = 0;
  CHECK_THROWS_AS(cfg.validate(100), ArgumentError);
  cfg.top_k = 1;
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(100), ArgumentError);
  cfg.temperature = 1.0;
  cfg.samples = 0;
  CHECK_THROWS_AS(cfg.validate(100), ArgumentError);
}

TEST_CASE("truncated distribution keeps the top k and renormalizes") {
  const std::vector<float> logits = {1.0f, 3.0f, 2.0f, 3.0f, -1.0f};
  const auto dist = sample::truncated_distribution(logits, 2.0, 3);
  REQUIRE(dist.size() == 3);
  CHECK(dist[0].first == 1);  // tie broken by lower id
  CHECK(dist[1].first == 3);
  CHECK(dist[2].first == 2);
  const double z = 2 * std::exp(1.5) + std::exp(1.0);
  CHECK(dist[0].second == doctest::Approx(std::exp(1.5) / z).epsilon(1e-12));
  CHECK(dist[2].second == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
}

TEST_CASE("top-1 sampling equals greedy decoding") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 3);
  const std::vector<int> prompt = {2, 3, 4, 5};
  auto cfg = config(vocab, 30, 8);
  cfg.top_k = 1;
  const auto set = sample::sample_answers(m, prompt, nullptr, cfg, vocab);
  const auto greedy = sample::greedy_decode(m, prompt, nullptr, cfg.max_tokens, cfg.stop_tokens);
  const auto expected = corpus::detokenize(greedy, vocab);
  CHECK(set.answers.size() == 30);
  for (const auto& a : set.answers) CHECK(a == expected);
}

TEST_CASE("zero coefficient and no plan give identical sample sets") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 4);
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const std::vector<int> prompt = {2, static_cast<int>(3 + trial % 5), 4};
    const auto plan = random_plan(trial % 3, trial, 0.0);
    const auto cfg = config(vocab, 40, trial);
    const auto plain = sample::sample_answers(m, prompt, nullptr, cfg, vocab);
    const auto zero = sample::sample_answers(m, prompt, &plan, cfg, vocab);
    CHECK(plain.answers == zero.answers);
    CHECK(plain.seeds == zero.seeds);
  }
}

TEST_CASE("sampling is reproducible and seed dependent") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 5);
  const std::vector<int> prompt = {2, 6, 7};
  const auto plan = random_plan(1, 3, 2.0);
  const auto a = sample::sample_answers(m, prompt, &plan, config(vocab, 50, 1), vocab);
  const auto b = sample::sample_answers(m, prompt, &plan, config(vocab, 50, 1), vocab);
  const auto c = sample::sample_answers(m, prompt, &plan, config(vocab, 50, 2), vocab);
  CHECK(a.answers == b.answers);
  CHECK(a.answers != c.answers);
  for (std::size_t i = 0; i < a.seeds.size(); ++i) CHECK(a.seeds[i] == sample::sample_seed(1, i));
}

TEST_CASE("empirical first-token frequencies match the truncated softmax") {
  const std::vector<float> logits = {0.3f, 1.7f, -0.4f, 1.1f};
  const auto m = fixed_logit_model(logits);
  DecodeConfig cfg;
  cfg.temperature = 2.0;
  cfg.top_k = 3;
  cfg.max_tokens = 1;
  cfg.samples = 1;
  const std::vector<int> prompt = {2};
  sample::Sampler sampler(m, prompt, nullptr, cfg);
  const auto dist = sample::truncated_distribution(logits, cfg.temperature, cfg.top_k);
  std::vector<double> expected(4, 0.0), observed(4, 0.0);
  for (const auto& [t, p] : dist) expected[t] = p;
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto tokens = sampler.sample(sample::sample_seed(99, i));
    REQUIRE(tokens.size() == 1);
    observed[tokens[0]] += 1.0 / draws;
  }
  double l1 = 0.0;
  for (int t = 0; t < 4; ++t) l1 += std::abs(observed[t] - expected[t]);
  CHECK(l1 < 0.01);
  CHECK(observed[2] == 0.0);  // truncated away
}

TEST_CASE("continuing a steered sample without the plan reproduces it") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 6);
  const std::vector<int> prompt = {2, 3, 9, 4};
  const auto plan = random_plan(2, 11, 3.0);
  auto cfg = config(vocab, 1, 0);
  cfg.stop_tokens.clear();
  sample::Sampler steered(m, prompt, &plan, cfg);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto tokens = steered.sample(s);
    REQUIRE(tokens.size() == cfg.max_tokens);
    std::vector<int> forced = prompt;
    forced.push_back(tokens[0]);
    auto rest_cfg = cfg;
    rest_cfg.max_tokens = cfg.max_tokens - 1;
    sample::Sampler plain(m, forced, nullptr, rest_cfg);
    const auto rest = plain.sample(s, 1);
    CHECK(std::equal(rest.begin(), rest.end(), tokens.begin() + 1));
  }
}

TEST_CASE("sampling stops at stop tokens and keeps the period") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 7);
  auto cfg = config(vocab, 100, 3);
  cfg.top_k = vocab.size();
  const auto set = sample::sample_answers(m, std::vector<int>{2, 3}, nullptr, cfg, vocab);
  bool saw_period = false;
  for (const auto& a : set.answers) {
    const auto words = corpus::split_words(a);
    CHECK(words.size() <= cfg.max_tokens);
    const auto dot = std::find(words.begin(), words.end(), ".");
    if (dot != words.end()) {
      saw_period = true;
      CHECK(dot + 1 == words.end());
    }
    CHECK(a.find("<end>") == std::string::npos);
  }
  CHECK(saw_period);
}

TEST_CASE("overlong prompts raise a capacity error") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 8, 8);
  const std::vector<int> prompt(5, 3);
  auto cfg = config(vocab, 1, 0);
  cfg.max_tokens = 4;
  CHECK_THROWS_AS(sample::sample_answers(m, prompt, nullptr, cfg, vocab), CapacityError);
  CHECK_THROWS_AS(sample::next_token_distribution(m, std::vector<int>(9, 3), nullptr),
                  CapacityError);
}

TEST_CASE("next token distribution is sorted and exact") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 9);
  const std::vector<int> prompt = {2, 5, 6};
  const auto dist = sample::next_token_distribution(m, prompt, nullptr, 5);
  REQUIRE(dist.size() == 5);
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    sum += dist[i].probability;
    if (i) CHECK(dist[i].probability <= dist[i - 1].probability);
  }
  CHECK(sum <= 1.0 + 1e-12);
  const auto full = sample::next_token_distribution(m, prompt, nullptr, vocab.size());
  double total = 0.0, entropy = 0.0;
  for (const auto& tp : full) {
    total += tp.probability;
    if (tp.probability > 0) entropy -= tp.probability * std::log(tp.probability);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sample::next_token_entropy(m, prompt, nullptr) == doctest::Approx(entropy).epsilon(1e-12));
  const auto logits = model::forward(m, prompt);
  double z = 0.0;
  for (float l : logits) z += std::exp(static_cast<double>(l));
  CHECK(full[0].probability ==
        doctest::Approx(std::exp(static_cast<double>(logits[full[0].token])) / z).epsilon(1e-9));

  const auto zero = random_plan(1, 4, 0.0);
  const auto with_zero = sample::next_token_distribution(m, prompt, &zero, vocab.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(full[i].token == with_zero[i].token);
    CHECK(full[i].probability == with_zero[i].probability);
  }
}

TEST_CASE("sample files round-trip") {
  const auto vocab = toy_vocab();
  const auto m = random_model(vocab.size(), 10);
  auto a = sample::sample_answers(m, std::vector<int>{2, 3}, nullptr, config(vocab, 12, 5), vocab, "q1",
                                  sample::Condition::unlearned);
  auto b = sample::sample_answers(m, std::vector<int>{2, 4}, nullptr, config(vocab, 7, 6), vocab, "q2",
                                  sample::Condition::steered);
  const auto path = std::filesystem::temp_directory_path() / "anonact_samples.jsonl";
  sample::write_samples(path, std::vector{a, b});
  const auto back = sample::read_samples(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].question_id == "q1");
  CHECK(back[0].condition == sample::Condition::unlearned);
  CHECK(back[0].answers == a.answers);
  CHECK(back[0].seeds == a.seeds);
  CHECK(back[1].answers == b.answers);
  std::filesystem::remove(path);
}
