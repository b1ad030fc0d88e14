#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "anonact/corpus/qa.hpp"
#include "anonact/corpus/universe.hpp"
#include "anonact/corpus/vocab.hpp"
#include "anonact/model/transformer.hpp"
#include "anonact/sample/sample.hpp"

namespace anonact::train {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;  // epochs between logged losses; 0 logs only the last
  double final_lr_fraction = 0.1;  // cosine decay from learning_rate to this fraction

  void validate() const;
};

// One training example: input tokens, next-token targets, per-position weights.
struct Sequence {
  std::vector<int> tokens;
  std::vector<int> targets;
  std::vector<float> weights;
};

// <end> document <end>, split into windows of at most context_len inputs.
std::vector<Sequence> encode_document(const std::string& document, const corpus::Vocab& vocab,
                                      std::size_t context_len);

struct TrainResult {
  model::Model model;
  std::vector<std::pair<std::size_t, double>> loss_log;  // (epoch, mean loss)
  double final_loss = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

// Next-token cross-entropy with Adam over shuffled mini-batches. Throws
// ArgumentError for an empty corpus and TrainingError on a non-finite loss.
TrainResult train_base(const model::ModelConfig& config, const std::vector<std::string>& corpus,
                       const corpus::Vocab& vocab, const TrainConfig& tcfg,
                       const ProgressFn& progress = {});

// Mean per-token cross-entropy (natural log) over documents, and its exp.
double corpus_loss(const model::Model& model, const std::vector<std::string>& documents,
                   const corpus::Vocab& vocab);
double perplexity(const model::Model& model, const std::vector<std::string>& documents,
                  const corpus::Vocab& vocab);

// Decode settings for every behavioral probe.
struct ProbeConfig {
  std::size_t samples = 100;
  double temperature = 2.0;
  std::size_t top_k = 40;
  std::size_t max_tokens = 10;
  std::uint64_t seed = 0x9e3779b9ULL;
};

sample::DecodeConfig probe_decode(const ProbeConfig& probe, const corpus::Vocab& vocab);

// Sampled CAF of one item's original prompt.
double probe_caf(const model::Model& model, const corpus::QAItem& item,
                 const corpus::PromptFormat& format, const corpus::Vocab& vocab,
                 const ProbeConfig& probe, const model::InjectionPlan* plan = nullptr);

struct CalibrationRecord {
  std::string id;
  bool greedy_correct = false;
  double caf = 0.0;
  bool passed = false;
};

// Keeps items whose greedy answer leaks and whose sampled CAF reaches `min_caf`.
std::vector<CalibrationRecord> calibrate(const model::Model& model,
                                         const std::vector<corpus::QAItem>& items,
                                         const corpus::PromptFormat& format,
                                         const corpus::Vocab& vocab, const ProbeConfig& probe,
                                         double min_caf = 0.8);

enum class UnlearnMethod { gradient_ascent, replacement };
std::string to_string(UnlearnMethod m);
UnlearnMethod parse_unlearn_method(const std::string& s);

// Positions of the forget document that receive the forget loss.
enum class ForgetScope { keyword, answer, document };
std::string to_string(ForgetScope s);
ForgetScope parse_forget_scope(const std::string& s);

struct UnlearnConfig {
  UnlearnMethod method = UnlearnMethod::gradient_ascent;
  std::vector<std::string> forget_ids;
  double retain_weight = 1.0;                           // lambda
  std::map<std::string, std::string> substitution;      // true keyword -> false keyword
  std::size_t steps = 300;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t retain_batch = 8;
  std::size_t probe_every = 5;
  ForgetScope scope = ForgetScope::answer;
  double caf_target = 0.2;            // gradient ascent: stop at mean forget CAF <= target
  double max_perplexity_growth = 0.2;  // relative retain perplexity growth allowed
  double true_prob_limit = 0.05;      // replacement: true keyword first-token probability
  ProbeConfig probe;

  void validate() const;
};

enum class UnlearnStatus { ok, warning };
std::string to_string(UnlearnStatus s);

struct UnlearnResult {
  model::Model model;
  UnlearnStatus status = UnlearnStatus::ok;
  std::string message;
  std::size_t steps_run = 0;
  bool target_reached = false;
  double forget_caf = 0.0;  // mean over forget items at the end
  double retain_perplexity_before = 0.0;
  double retain_perplexity_after = 0.0;
};

std::vector<corpus::QAItem> select_items(const std::vector<corpus::QAItem>& items,
                                         const std::vector<std::string>& ids);

// Ascends the forget loss on the forget items' answer documents while
// descending lambda * retain loss; probes sampled CAF every probe_every steps.
UnlearnResult unlearn_gradient_ascent(const model::Model& model,
                                      const std::vector<corpus::QAItem>& items,
                                      const std::vector<std::string>& retain_corpus,
                                      const corpus::PromptFormat& format,
                                      const corpus::Vocab& vocab, const UnlearnConfig& ucfg,
                                      const ProgressFn& progress = {});

// A false keyword per forget item's primary keyword: another object of the
// same relation that occurs in the corpus.
std::map<std::string, std::string> make_substitution_map(const std::vector<corpus::QAItem>& all,
                                                         const std::vector<std::string>& forget_ids,
                                                         std::uint64_t seed);

void validate_substitution(const std::map<std::string, std::string>& map,
                           const std::vector<corpus::QAItem>& forget, const corpus::Vocab& vocab);

// The item's answer sentence with the primary keyword swapped for its false keyword.
std::string replaced_answer(const corpus::QAItem& item,
                            const std::map<std::string, std::string>& map);

// Fine-tunes on replaced answers until, for every forget item, the false
// keyword's first token is the top next token and the true keyword's first
// token probability is below true_prob_limit.
UnlearnResult unlearn_replacement(const model::Model& model,
                                  const std::vector<corpus::QAItem>& items,
                                  const std::vector<std::string>& retain_corpus,
                                  const corpus::PromptFormat& format, const corpus::Vocab& vocab,
                                  const UnlearnConfig& ucfg, const ProgressFn& progress = {});

// Next-token probability of a keyword's first token after the item's prompt.
double keyword_probability(const model::Model& model, const corpus::QAItem& item,
                           const std::string& keyword, const corpus::PromptFormat& format,
                           const corpus::Vocab& vocab, const model::InjectionPlan* plan = nullptr);

}  // namespace anonact::train
