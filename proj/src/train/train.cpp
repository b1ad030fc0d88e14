#include "anonact/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "anonact/errors.hpp"
#include "anonact/nn/param_store.hpp"
#include "anonact/rng.hpp"
#include "anonact/score/score.hpp"

namespace anonact::train {

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw ArgumentError("epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (final_lr_fraction < 0.0 || final_lr_fraction > 1.0) {
    throw ArgumentError("final learning-rate fraction must lie in [0, 1]");
  }
}

std::vector<Sequence> encode_document(const std::string& document, const corpus::Vocab& vocab,
                                      std::size_t context_len) {
  std::vector<int> all = {corpus::Vocab::kEnd};
  const auto words = corpus::tokenize(document, vocab);
  all.insert(all.end(), words.begin(), words.end());
  all.push_back(corpus::Vocab::kEnd);
  std::vector<Sequence> out;
  for (std::size_t start = 0; start + 1 < all.size(); start += context_len) {
    const std::size_t n = std::min(context_len, all.size() - 1 - start);
    Sequence s;
    s.tokens.assign(all.begin() + static_cast<std::ptrdiff_t>(start),
                    all.begin() + static_cast<std::ptrdiff_t>(start + n));
    s.targets.assign(all.begin() + static_cast<std::ptrdiff_t>(start + 1),
                     all.begin() + static_cast<std::ptrdiff_t>(start + n + 1));
    s.weights.assign(n, 1.0f);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::vector<Sequence> encode_corpus(const std::vector<std::string>& corpus,
                                    const corpus::Vocab& vocab, std::size_t context_len) {
  std::vector<Sequence> out;
  for (const auto& doc : corpus) {
    auto part = encode_document(doc, vocab, context_len);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

double accumulate(model::Model& m, const Sequence& s, float scale) {
  return static_cast<double>(
      model::loss_and_grad<float>(m, s.tokens, s.targets, s.weights, scale));
}

// Deterministic index in [0, n) independent of the standard library's distributions.
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

void report(const ProgressFn& progress, const std::string& line) {
  if (progress) progress(line);
}

}  // namespace

TrainResult train_base(const model::ModelConfig& config, const std::vector<std::string>& corpus,
                       const corpus::Vocab& vocab, const TrainConfig& tcfg,
                       const ProgressFn& progress) {
  tcfg.validate();
  if (corpus.empty()) throw ArgumentError("training corpus is empty");
  const auto data = encode_corpus(corpus, vocab, config.context_len);

  TrainResult result{model::Model(config), {}, 0.0};
  nn::Adam adam({tcfg.learning_rate});
  std::mt19937_64 rng(derive_seed(tcfg.seed, 0x7472));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t batches = (data.size() + tcfg.batch_size - 1) / tcfg.batch_size;
  const double total_steps = static_cast<double>(batches * tcfg.epochs);
  std::size_t step_index = 0;
  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
      const float scale = 1.0f / static_cast<float>(end - start);
      result.model.params().zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += accumulate(result.model, data[order[i]], scale);
      }
      const double progress_frac = static_cast<double>(step_index++) / total_steps;
      const double floor = tcfg.final_lr_fraction;
      const double lr = tcfg.learning_rate *
                        (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(M_PI * progress_frac)));
      adam.step(result.model.params(), lr);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError("training loss diverged");
    result.final_loss = epoch_loss;
    const bool log_now = epoch == tcfg.epochs || (tcfg.eval_every && epoch % tcfg.eval_every == 0);
    if (log_now) {
      result.loss_log.emplace_back(epoch, epoch_loss);
      report(progress, "epoch " + std::to_string(epoch) + " loss " + score::format_number(epoch_loss));
    }
  }
  result.model.params().zero_grad();
  result.model.params().reset_moments();
  return result;
}

double corpus_loss(const model::Model& model, const std::vector<std::string>& documents,
                   const corpus::Vocab& vocab) {
  if (documents.empty()) throw ArgumentError("loss over an empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : encode_corpus(documents, vocab, model.config().context_len)) {
    total += static_cast<double>(model::sequence_loss<float>(model, s.tokens, s.targets, s.weights)) *
             static_cast<double>(s.tokens.size());
    tokens += s.tokens.size();
  }
  return total / static_cast<double>(tokens);
}

double perplexity(const model::Model& model, const std::vector<std::string>& documents,
                  const corpus::Vocab& vocab) {
  return std::exp(corpus_loss(model, documents, vocab));
}

sample::DecodeConfig probe_decode(const ProbeConfig& probe, const corpus::Vocab& vocab) {
  sample::DecodeConfig cfg;
  cfg.samples = probe.samples;
  cfg.temperature = probe.temperature;
  cfg.top_k = std::min(probe.top_k, vocab.size());
  cfg.max_tokens = probe.max_tokens;
  cfg.stop_tokens = sample::default_stop_tokens(vocab);
  cfg.seed = probe.seed;
  return cfg;
}

double probe_caf(const model::Model& model, const corpus::QAItem& item,
                 const corpus::PromptFormat& format, const corpus::Vocab& vocab,
                 const ProbeConfig& probe, const model::InjectionPlan* plan) {
  const auto prompt = sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
  const auto set = sample::sample_answers(model, prompt, plan, probe_decode(probe, vocab), vocab,
                                          item.id);
  return score::caf(set, item.answer_keywords);
}

std::vector<CalibrationRecord> calibrate(const model::Model& model,
                                         const std::vector<corpus::QAItem>& items,
                                         const corpus::PromptFormat& format,
                                         const corpus::Vocab& vocab, const ProbeConfig& probe,
                                         double min_caf) {
  std::vector<CalibrationRecord> out;
  const auto stops = sample::default_stop_tokens(vocab);
  for (const auto& item : items) {
    CalibrationRecord r;
    r.id = item.id;
    const auto prompt =
        sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
    const auto greedy = sample::greedy_decode(model, prompt, nullptr, probe.max_tokens, stops);
    r.greedy_correct = score::is_leak(corpus::detokenize(greedy, vocab), item.answer_keywords);
    r.caf = probe_caf(model, item, format, vocab, probe);
    r.passed = r.greedy_correct && r.caf >= min_caf;
    out.push_back(std::move(r));
  }
  return out;
}

std::string to_string(UnlearnMethod m) {
  return m == UnlearnMethod::replacement ? "replacement" : "gradient_ascent";
}

UnlearnMethod parse_unlearn_method(const std::string& s) {
  if (s == "gradient_ascent") return UnlearnMethod::gradient_ascent;
  if (s == "replacement") return UnlearnMethod::replacement;
  throw ArgumentError("unknown unlearning method '" + s + "'");
}

std::string to_string(ForgetScope s) {
  switch (s) {
    case ForgetScope::keyword: return "keyword";
    case ForgetScope::answer: return "answer";
    case ForgetScope::document: return "document";
  }
  return "answer";
}

ForgetScope parse_forget_scope(const std::string& s) {
  if (s == "keyword") return ForgetScope::keyword;
  if (s == "answer") return ForgetScope::answer;
  if (s == "document") return ForgetScope::document;
  throw ArgumentError("unknown forget scope '" + s + "'");
}

std::string to_string(UnlearnStatus s) { return s == UnlearnStatus::ok ? "ok" : "warning"; }

void UnlearnConfig::validate() const {
  if (forget_ids.empty()) throw ArgumentError("forget set is empty");
  if (!(learning_rate > 0.0)) throw ArgumentError("unlearning learning rate must be positive");
  if (retain_weight < 0.0) throw ArgumentError("retain weight must be non-negative");
  if (probe_every == 0) throw ArgumentError("probe interval must be positive");
  if (method == UnlearnMethod::replacement && substitution.empty()) {
    throw ArgumentError("replacement unlearning needs a substitution map");
  }
}

std::vector<corpus::QAItem> select_items(const std::vector<corpus::QAItem>& items,
                                         const std::vector<std::string>& ids) {
  std::vector<corpus::QAItem> out;
  for (const auto& id : ids) {
    auto it = std::find_if(items.begin(), items.end(), [&](const auto& q) { return q.id == id; });
    if (it == items.end()) throw ArgumentError("unknown question id " + id);
    out.push_back(*it);
  }
  return out;
}

namespace {

// The answer document of an item with weights restricted to `scope`.
Sequence forget_sequence(const corpus::QAItem& item, const std::string& answer,
                         const std::string& keyword, const corpus::PromptFormat& format,
                         const corpus::Vocab& vocab, ForgetScope scope, std::size_t context_len) {
  auto seqs = encode_document(format.document(item.question, answer), vocab, context_len);
  if (seqs.size() != 1) throw CapacityError("answer document of " + item.id + " exceeds context");
  Sequence s = std::move(seqs.front());
  const auto prompt = sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
  if (prompt.size() > s.tokens.size() ||
      !std::equal(prompt.begin(), prompt.end(), s.tokens.begin())) {
    throw DiagnosticError("answer of " + item.id + " does not extend its answer start");
  }
  const std::size_t first = prompt.size() - 1;  // target index of the first answer token
  std::size_t last = s.targets.size();
  if (scope == ForgetScope::keyword) last = first + corpus::tokenize(keyword, vocab).size();
  for (std::size_t j = 0; j < s.weights.size(); ++j) {
    const bool on = scope == ForgetScope::document || (j >= first && j < last);
    s.weights[j] = on ? 1.0f : 0.0f;
  }
  return s;
}

double mean_forget_caf(const model::Model& m, const std::vector<corpus::QAItem>& forget,
                       const corpus::PromptFormat& format, const corpus::Vocab& vocab,
                       const ProbeConfig& probe) {
  double sum = 0.0;
  for (const auto& item : forget) sum += probe_caf(m, item, format, vocab, probe);
  return sum / static_cast<double>(forget.size());
}

struct Loop {
  model::Model model;
  nn::Adam adam;
  std::mt19937_64 rng;
  std::vector<Sequence> retain;
};

Loop start_loop(const model::Model& base, const std::vector<std::string>& retain_corpus,
                const corpus::Vocab& vocab, const UnlearnConfig& ucfg) {
  Loop loop{base, nn::Adam({ucfg.learning_rate}), std::mt19937_64(derive_seed(ucfg.seed, 0x756e)),
            encode_corpus(retain_corpus, vocab, base.config().context_len)};
  loop.model.params().zero_grad();
  loop.model.params().reset_moments();
  return loop;
}

// One update: `forget_sign` * forget loss + lambda * retain loss.
double step(Loop& loop, const std::vector<Sequence>& forget, float forget_sign,
            const UnlearnConfig& ucfg) {
  auto& m = loop.model;
  m.params().zero_grad();
  double forget_loss = 0.0;
  const float fscale = forget_sign / static_cast<float>(forget.size());
  for (const auto& s : forget) forget_loss += accumulate(m, s, fscale);
  if (ucfg.retain_weight > 0.0 && !loop.retain.empty() && ucfg.retain_batch > 0) {
    const float rscale =
        static_cast<float>(ucfg.retain_weight) / static_cast<float>(ucfg.retain_batch);
    for (std::size_t b = 0; b < ucfg.retain_batch; ++b) {
      accumulate(m, loop.retain[pick(loop.rng, loop.retain.size())], rscale);
    }
  }
  forget_loss /= static_cast<double>(forget.size());
  if (!std::isfinite(forget_loss)) throw TrainingError("unlearning loss diverged");
  loop.adam.step(m.params());
  return forget_loss;
}

void finish(UnlearnResult& result, const std::vector<std::string>& retain_corpus,
            const corpus::Vocab& vocab, double max_growth) {
  result.model.params().zero_grad();
  result.model.params().reset_moments();
  if (!retain_corpus.empty()) {
    result.retain_perplexity_after = perplexity(result.model, retain_corpus, vocab);
    const double growth = result.retain_perplexity_after / result.retain_perplexity_before - 1.0;
    if (growth > max_growth) {
      result.status = UnlearnStatus::warning;
      result.message += (result.message.empty() ? "" : "; ") + std::string("retain perplexity grew ") +
                        score::format_number(100.0 * growth) + "%";
    }
  }
  if (!result.target_reached) {
    result.status = UnlearnStatus::warning;
    result.message += (result.message.empty() ? "" : "; ") +
                      std::string("target not reached within the step budget");
  }
}

}  // namespace

UnlearnResult unlearn_gradient_ascent(const model::Model& model,
                                      const std::vector<corpus::QAItem>& items,
                                      const std::vector<std::string>& retain_corpus,
                                      const corpus::PromptFormat& format,
                                      const corpus::Vocab& vocab, const UnlearnConfig& ucfg,
                                      const ProgressFn& progress) {
  ucfg.validate();
  const auto forget = select_items(items, ucfg.forget_ids);
  std::vector<Sequence> seqs;
  for (const auto& item : forget) {
    seqs.push_back(forget_sequence(item, item.answer, item.answer_keywords.front(), format, vocab,
                                   ucfg.scope, model.config().context_len));
  }
  Loop loop = start_loop(model, retain_corpus, vocab, ucfg);
  UnlearnResult result{model, UnlearnStatus::ok, {}, 0, false, 0.0, 0.0, 0.0};
  if (!retain_corpus.empty()) result.retain_perplexity_before = perplexity(model, retain_corpus, vocab);

  result.forget_caf = mean_forget_caf(loop.model, forget, format, vocab, ucfg.probe);
  result.target_reached = result.forget_caf <= ucfg.caf_target;
  std::size_t steps = 0;
  while (!result.target_reached && steps < ucfg.steps) {
    const double loss = step(loop, seqs, -1.0f, ucfg);
    ++steps;
    if (steps % ucfg.probe_every == 0 || steps == ucfg.steps) {
      result.forget_caf = mean_forget_caf(loop.model, forget, format, vocab, ucfg.probe);
      result.target_reached = result.forget_caf <= ucfg.caf_target;
      report(progress, "step " + std::to_string(steps) + " forget loss " +
                           score::format_number(loss) + " forget caf " +
                           score::format_number(result.forget_caf));
    }
  }
  result.model = std::move(loop.model);
  result.steps_run = steps;
  finish(result, retain_corpus, vocab, ucfg.max_perplexity_growth);
  return result;
}

std::map<std::string, std::string> make_substitution_map(const std::vector<corpus::QAItem>& all,
                                                         const std::vector<std::string>& forget_ids,
                                                         std::uint64_t seed) {
  std::map<std::string, std::string> out;
  const auto forget = select_items(all, forget_ids);
  for (const auto& item : forget) {
    const std::string& truth = item.answer_keywords.front();
    if (out.contains(truth)) continue;
    std::set<std::string> candidates;
    for (const auto& other : all) {
      if (other.relation != item.relation) continue;
      const std::string& k = other.answer_keywords.front();
      if (std::find(item.answer_keywords.begin(), item.answer_keywords.end(), k) ==
              item.answer_keywords.end() &&
          k != item.subject) {
        candidates.insert(k);
      }
    }
    if (candidates.empty()) {
      throw ArgumentError("no false keyword available for relation " + item.relation);
    }
    std::vector<std::string> pool(candidates.begin(), candidates.end());
    std::mt19937_64 rng(text_seed(seed, truth));
    out.emplace(truth, pool[pick(rng, pool.size())]);
  }
  return out;
}

void validate_substitution(const std::map<std::string, std::string>& map,
                           const std::vector<corpus::QAItem>& forget, const corpus::Vocab& vocab) {
  for (const auto& [from, to] : map) {
    if (from == to) throw ArgumentError("substitution maps '" + from + "' to itself");
    for (const auto& w : corpus::split_words(to)) {
      if (!vocab.contains(w)) throw ArgumentError("false keyword '" + to + "' is out of vocabulary");
    }
  }
  for (const auto& item : forget) {
    auto it = map.find(item.answer_keywords.front());
    if (it == map.end()) {
      throw ArgumentError("substitution map misses keyword '" + item.answer_keywords.front() + "'");
    }
    for (const auto& k : item.answer_keywords) {
      if (corpus::contains_phrase(it->second, k)) {
        throw ArgumentError("false keyword '" + it->second + "' contains a true keyword of " +
                            item.id);
      }
    }
  }
}

std::string replaced_answer(const corpus::QAItem& item,
                            const std::map<std::string, std::string>& map) {
  const std::string& truth = item.answer_keywords.front();
  const std::string& fake = map.at(truth);
  auto words = corpus::split_words(item.answer);
  const auto start = corpus::split_words(item.answer_start).size();
  const auto kw = corpus::split_words(truth);
  if (words.size() < start + kw.size() ||
      !std::equal(kw.begin(), kw.end(), words.begin() + static_cast<std::ptrdiff_t>(start))) {
    throw DiagnosticError("answer of " + item.id + " does not continue with its keyword");
  }
  std::vector<std::string> out(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(start));
  for (auto& w : corpus::split_words(fake)) out.push_back(std::move(w));
  out.insert(out.end(), words.begin() + static_cast<std::ptrdiff_t>(start + kw.size()), words.end());
  return corpus::join_words(out);
}

double keyword_probability(const model::Model& model, const corpus::QAItem& item,
                           const std::string& keyword, const corpus::PromptFormat& format,
                           const corpus::Vocab& vocab, const model::InjectionPlan* plan) {
  const auto prompt = sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
  const int token = corpus::tokenize(keyword, vocab).front();
  const auto dist = sample::next_token_distribution(model, prompt, plan, vocab.size());
  for (const auto& tp : dist) {
    if (tp.token == token) return tp.probability;
  }
  return 0.0;
}

UnlearnResult unlearn_replacement(const model::Model& model,
                                  const std::vector<corpus::QAItem>& items,
                                  const std::vector<std::string>& retain_corpus,
                                  const corpus::PromptFormat& format, const corpus::Vocab& vocab,
                                  const UnlearnConfig& ucfg, const ProgressFn& progress) {
  ucfg.validate();
  const auto forget = select_items(items, ucfg.forget_ids);
  validate_substitution(ucfg.substitution, forget, vocab);
  std::vector<Sequence> seqs;
  for (const auto& item : forget) {
    seqs.push_back(forget_sequence(item, replaced_answer(item, ucfg.substitution),
                                   ucfg.substitution.at(item.answer_keywords.front()), format,
                                   vocab, ucfg.scope, model.config().context_len));
  }
  const auto replaced = [&](const model::Model& m) {
    double caf_sum = 0.0;
    bool all = true;
    for (const auto& item : forget) {
      const std::string& fake = ucfg.substitution.at(item.answer_keywords.front());
      const auto prompt =
          sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
      const auto top = sample::next_token_distribution(m, prompt, nullptr, 1);
      const bool modal = top.front().token == corpus::tokenize(fake, vocab).front();
      const double p_true =
          keyword_probability(m, item, item.answer_keywords.front(), format, vocab);
      all = all && modal && p_true < ucfg.true_prob_limit;
      caf_sum += probe_caf(m, item, format, vocab, ucfg.probe);
    }
    return std::pair{all, caf_sum / static_cast<double>(forget.size())};
  };

  Loop loop = start_loop(model, retain_corpus, vocab, ucfg);
  UnlearnResult result{model, UnlearnStatus::ok, {}, 0, false, 0.0, 0.0, 0.0};
  if (!retain_corpus.empty()) result.retain_perplexity_before = perplexity(model, retain_corpus, vocab);
  std::tie(result.target_reached, result.forget_caf) = replaced(loop.model);
  std::size_t steps = 0;
  while (!result.target_reached && steps < ucfg.steps) {
    const double loss = step(loop, seqs, 1.0f, ucfg);
    ++steps;
    if (steps % ucfg.probe_every == 0 || steps == ucfg.steps) {
      std::tie(result.target_reached, result.forget_caf) = replaced(loop.model);
      report(progress, "step " + std::to_string(steps) + " replacement loss " +
                           score::format_number(loss) + " true caf " +
                           score::format_number(result.forget_caf));
    }
  }
  result.model = std::move(loop.model);
  result.steps_run = steps;
  finish(result, retain_corpus, vocab, ucfg.max_perplexity_growth);
  return result;
}

}  // namespace anonact::train
