#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anonact/corpus/vocab.hpp"
#include "anonact/model/transformer.hpp"

namespace anonact::sample {

enum class Condition { base, unlearned, steered };
std::string to_string(Condition c);
Condition parse_condition(const std::string& s);

struct DecodeConfig {
  double temperature = 2.0;
  std::size_t top_k = 40;
  std::size_t samples = 200;
  std::size_t max_tokens = 10;
  std::vector<int> stop_tokens;  // typically <end> and "."
  std::uint64_t seed = 0;

  void validate(std::size_t vocab_size) const;
};

// <end> plus the sentence-final period when the vocabulary has one.
std::vector<int> default_stop_tokens(const corpus::Vocab& vocab);

// Prompt encoding used everywhere: <end> as a leading separator, then words.
std::vector<int> encode_prompt(const std::string& text, const corpus::Vocab& vocab);

struct SampleSet {
  std::string question_id;
  Condition condition = Condition::base;
  std::vector<std::string> answers;  // by sample index
  DecodeConfig config;
  std::vector<std::uint64_t> seeds;  // per-sample seeds
};

// Decoder over one prompt. The prompt's keys/values are computed once without
// any intervention; every decode step then extends that cache, which is
// bit-identical to recomputing the full forward pass. The plan, if any, only
// enters the step whose index equals plan.active_step, and that step's
// steered residuals are discarded afterwards, so later steps are
// intervention-free exactly as under full recomputation.
class Sampler {
 public:
  Sampler(const model::Model& model, std::span<const int> prompt,
          const model::InjectionPlan* plan, DecodeConfig config);

  // Generated tokens for one sample, stop token included. Step i draws its
  // uniform from derive_seed(seed, first_step + i); `first_step` also offsets
  // the plan's active step, so decoding can resume mid-answer.
  std::vector<int> sample(std::uint64_t seed, std::size_t first_step = 0) const;

  // Step-0 logits after the plan (if active at first_step = 0).
  const std::vector<float>& first_logits() const { return first_logits_; }

 private:
  std::vector<float> step_logits(const model::KvCache& cache, const std::vector<int>& sequence,
                                 const std::vector<float>& plain, std::size_t step) const;

  const model::Model& model_;
  std::vector<int> prompt_;
  const model::InjectionPlan* plan_;
  DecodeConfig config_;
  model::KvCache prompt_cache_;
  std::vector<float> prompt_logits_;
  std::vector<float> first_logits_;
};

// Temperature, top-k truncation (ties broken by lower id), renormalization.
// Returns (token, probability) pairs of the kept support in logit order.
std::vector<std::pair<int, double>> truncated_distribution(std::span<const float> logits,
                                                           double temperature, std::size_t top_k);

// Inverse-CDF draw from a truncated distribution.
int draw_token(const std::vector<std::pair<int, double>>& dist, double u);

std::uint64_t sample_seed(std::uint64_t master, std::size_t index);

SampleSet sample_answers(const model::Model& model, std::span<const int> prompt,
                         const model::InjectionPlan* plan, const DecodeConfig& config,
                         const corpus::Vocab& vocab, std::string question_id = {},
                         Condition condition = Condition::base);

// Greedy continuation (top-1 at every step).
std::vector<int> greedy_decode(const model::Model& model, std::span<const int> prompt,
                               const model::InjectionPlan* plan, std::size_t max_tokens,
                               std::span<const int> stop_tokens);

struct TokenProbability {
  int token = 0;
  double probability = 0.0;
};

// Full temperature-1 softmax at step 0, sorted descending (ties by id); top M.
std::vector<TokenProbability> next_token_distribution(const model::Model& model,
                                                      std::span<const int> prompt,
                                                      const model::InjectionPlan* plan,
                                                      std::size_t top_m = 40);

// Shannon entropy (nats) of the full step-0 distribution.
double next_token_entropy(const model::Model& model, std::span<const int> prompt,
                          const model::InjectionPlan* plan);

// Line-delimited records: question id, condition, sample index, answer text.
void write_samples(const std::filesystem::path& path, const std::vector<SampleSet>& sets);
std::vector<SampleSet> read_samples(const std::filesystem::path& path);

}  // namespace anonact::sample
