#include "anonact/sample/sample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "anonact/errors.hpp"
#include "anonact/rng.hpp"
#include "json.hpp"

namespace anonact::sample {

std::string to_string(Condition c) {
  switch (c) {
    case Condition::base: return "base";
    case Condition::unlearned: return "unlearned";
    case Condition::steered: return "steered";
  }
  return "base";
}

Condition parse_condition(const std::string& s) {
  if (s == "base") return Condition::base;
  if (s == "unlearned") return Condition::unlearned;
  if (s == "steered") return Condition::steered;
  throw ArgumentError("unknown condition '" + s + "'");
}

void DecodeConfig::validate(std::size_t vocab_size) const {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  if (top_k < 1 || top_k > vocab_size) throw ArgumentError("top_k must lie in [1, vocab size]");
  if (samples < 1) throw ArgumentError("at least one sample required");
  if (max_tokens < 1) throw ArgumentError("max_tokens must be positive");
}

std::vector<int> default_stop_tokens(const corpus::Vocab& vocab) {
  std::vector<int> stops = {corpus::Vocab::kEnd};
  if (vocab.contains(".")) stops.push_back(vocab.id("."));
  return stops;
}

std::vector<int> encode_prompt(const std::string& text, const corpus::Vocab& vocab) {
  std::vector<int> tokens = {corpus::Vocab::kEnd};
  auto words = corpus::tokenize(text, vocab);
  tokens.insert(tokens.end(), words.begin(), words.end());
  return tokens;
}

std::uint64_t sample_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(master, index);
}

std::vector<std::pair<int, double>> truncated_distribution(std::span<const float> logits,
                                                           double temperature,
                                                           std::size_t top_k) {
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  std::vector<std::pair<int, double>> dist;
  dist.reserve(k);
  const double top = static_cast<double>(logits[order[0]]) / temperature;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = std::exp(static_cast<double>(logits[order[i]]) / temperature - top);
    dist.emplace_back(order[i], w);
    total += w;
  }
  for (auto& [token, p] : dist) p /= total;
  return dist;
}

int draw_token(const std::vector<std::pair<int, double>>& dist, double u) {
  double cumulative = 0.0;
  for (const auto& [token, p] : dist) {
    cumulative += p;
    if (u < cumulative) return token;
  }
  return dist.back().first;
}

Sampler::Sampler(const model::Model& model, std::span<const int> prompt,
                 const model::InjectionPlan* plan, DecodeConfig config)
    : model_(model), prompt_(prompt.begin(), prompt.end()), plan_(plan),
      config_(std::move(config)) {
  config_.validate(model.config().vocab_size);
  if (prompt_.size() + config_.max_tokens > model.config().context_len) {
    throw CapacityError("prompt of " + std::to_string(prompt_.size()) + " tokens plus " +
                        std::to_string(config_.max_tokens) +
                        " generated tokens exceeds context length " +
                        std::to_string(model.config().context_len));
  }
  prompt_cache_ = model::make_cache(model_);
  prompt_logits_ = model::extend(model_, prompt_cache_, prompt_);
  first_logits_ = step_logits(prompt_cache_, prompt_, prompt_logits_, 0);
}

std::vector<float> Sampler::step_logits(const model::KvCache& cache,
                                        const std::vector<int>& sequence,
                                        const std::vector<float>& plain, std::size_t step) const {
  if (!plan_ || plan_->inert() || step != plan_->active_step) return plain;
  model::KvCache scratch = cache;
  scratch.length -= 1;
  const int last = sequence.back();
  return model::extend(model_, scratch, std::span<const int>(&last, 1), plan_);
}

std::vector<int> Sampler::sample(std::uint64_t seed, std::size_t first_step) const {
  model::KvCache cache = prompt_cache_;
  std::vector<int> sequence = prompt_;
  std::vector<float> plain = prompt_logits_;
  std::vector<int> generated;
  for (std::size_t i = 0; i < config_.max_tokens; ++i) {
    const std::size_t step = first_step + i;
    const std::vector<float> logits =
        (i == 0 && first_step == 0) ? first_logits_ : step_logits(cache, sequence, plain, step);
    std::mt19937_64 engine(derive_seed(seed, step));
    const int token =
        draw_token(truncated_distribution(logits, config_.temperature, config_.top_k),
                   uniform01(engine));
    generated.push_back(token);
    if (std::find(config_.stop_tokens.begin(), config_.stop_tokens.end(), token) !=
        config_.stop_tokens.end()) {
      break;
    }
    if (i + 1 == config_.max_tokens) break;
    sequence.push_back(token);
    plain = model::extend(model_, cache, std::span<const int>(&token, 1));
  }
  return generated;
}

SampleSet sample_answers(const model::Model& model, std::span<const int> prompt,
                         const model::InjectionPlan* plan, const DecodeConfig& config,
                         const corpus::Vocab& vocab, std::string question_id,
                         Condition condition) {
  Sampler sampler(model, prompt, plan, config);
  SampleSet set;
  set.question_id = std::move(question_id);
  set.condition = condition;
  set.config = config;
  set.answers.reserve(config.samples);
  set.seeds.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    const std::uint64_t seed = sample_seed(config.seed, i);
    set.seeds.push_back(seed);
    set.answers.push_back(corpus::detokenize(sampler.sample(seed), vocab));
  }
  return set;
}

std::vector<int> greedy_decode(const model::Model& model, std::span<const int> prompt,
                               const model::InjectionPlan* plan, std::size_t max_tokens,
                               std::span<const int> stop_tokens) {
  DecodeConfig cfg;
  cfg.temperature = 1.0;
  cfg.top_k = 1;
  cfg.samples = 1;
  cfg.max_tokens = max_tokens;
  cfg.stop_tokens.assign(stop_tokens.begin(), stop_tokens.end());
  return Sampler(model, prompt, plan, cfg).sample(0);
}

namespace {

std::vector<double> step0_probabilities(const model::Model& model, std::span<const int> prompt,
                                        const model::InjectionPlan* plan) {
  const bool steer = plan && !plan->inert() && plan->active_step == 0;
  const auto logits = steer ? model::forward_with_injection(model, prompt, *plan)
                            : model::forward(model, prompt);
  std::vector<double> probs(logits.begin(), logits.end());
  const double top = *std::max_element(probs.begin(), probs.end());
  double total = 0.0;
  for (double& p : probs) total += (p = std::exp(p - top));
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace

std::vector<TokenProbability> next_token_distribution(const model::Model& model,
                                                      std::span<const int> prompt,
                                                      const model::InjectionPlan* plan,
                                                      std::size_t top_m) {
  const auto probs = step0_probabilities(model, prompt, plan);
  std::vector<TokenProbability> out;
  out.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out.push_back({static_cast<int>(i), probs[i]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.probability > b.probability;
  });
  if (out.size() > top_m) out.resize(top_m);
  return out;
}

double next_token_entropy(const model::Model& model, std::span<const int> prompt,
                          const model::InjectionPlan* plan) {
  double h = 0.0;
  for (double p : step0_probabilities(model, prompt, plan)) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void write_samples(const std::filesystem::path& path, const std::vector<SampleSet>& sets) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArgumentError("cannot write samples " + path.string());
  for (const auto& set : sets) {
    for (std::size_t i = 0; i < set.answers.size(); ++i) {
      nlohmann::json row = {{"question_id", set.question_id},
                            {"condition", to_string(set.condition)},
                            {"sample_index", i},
                            {"answer", set.answers[i]}};
      if (i < set.seeds.size()) row["seed"] = set.seeds[i];
      out << row.dump() << '\n';
    }
  }
}

std::vector<SampleSet> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read samples " + path.string());
  std::vector<SampleSet> sets;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad sample record: ") + e.what());
    }
    const auto id = row.at("question_id").get<std::string>();
    const auto cond = row.at("condition").get<std::string>();
    auto [it, inserted] = index.try_emplace({id, cond}, sets.size());
    if (inserted) {
      SampleSet s;
      s.question_id = id;
      s.condition = parse_condition(cond);
      sets.push_back(std::move(s));
    }
    auto& set = sets[it->second];
    const auto idx = row.at("sample_index").get<std::size_t>();
    if (idx != set.answers.size()) throw FormatError("sample records out of order for " + id);
    set.answers.push_back(row.at("answer").get<std::string>());
    if (row.contains("seed")) set.seeds.push_back(row.at("seed").get<std::uint64_t>());
  }
  for (auto& s : sets) s.config.samples = s.answers.size();
  return sets;
}

}  // namespace anonact::sample
