#include "anonact/corpus/qa.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>

#include "anonact/corpus/vocab.hpp"
#include "anonact/errors.hpp"
#include "anonact/rng.hpp"
#include "json.hpp"

namespace anonact::corpus {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string replace_word(const std::string& text, const std::string& from, const std::string& to) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(from, pos);
    if (hit == std::string::npos) break;
    const bool left_ok = hit == 0 || !word_char(text[hit - 1]);
    const std::size_t end = hit + from.size();
    const bool right_ok = end == text.size() || !word_char(text[end]);
    out.append(text, pos, hit - pos);
    out += (left_ok && right_ok) ? to : from;
    pos = end;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

std::string strip_object(const std::string& answer_template) {
  const auto pos = answer_template.find("{o}");
  std::string head = answer_template.substr(0, pos);
  while (!head.empty() && head.back() == ' ') head.pop_back();
  return head;
}

}  // namespace

bool contains_phrase(const std::string& text, const std::string& phrase) {
  const auto hay = split_words(text);
  const auto needle = split_words(phrase);
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

std::vector<QAItem> build_qa(const Universe& u) {
  std::vector<QAItem> items;
  for (const auto& fact : u.facts) {
    const Relation& r = find_relation(fact.relation);
    const Entity& subject = u.entities.at(fact.subject);
    QAItem item;
    item.id = subject.name + "-" + fact.relation;
    item.question = render_template(r.question, u, fact);
    item.answer_start = render_template(strip_object(r.answer), u, fact);
    item.answer = render_template(r.answer, u, fact);
    item.answer_keywords.push_back(fact.object);
    for (const auto& alias : fact.aliases) {
      if (std::find(item.answer_keywords.begin(), item.answer_keywords.end(), alias) ==
          item.answer_keywords.end()) {
        item.answer_keywords.push_back(alias);
      }
    }
    item.slots.push_back({"person", subject.name});
    if (r.uses_place) item.slots.push_back({"place", subject.attributes.at("home")});
    item.relation = fact.relation;
    item.subject = subject.name;
    item.forget = fact.forget;
    items.push_back(std::move(item));
  }
  return items;
}

QAItem anonymize_question(const QAItem& item, const ReplacementPools& pools,
                          const AnonymizeOptions& options) {
  if (options.per_slot < 5 || options.per_slot > 25) {
    throw ArgumentError("replacements per slot must lie in [5, 25]");
  }
  if (options.cap == 0) throw ArgumentError("variant cap must be positive");
  if (item.slots.empty()) throw ArgumentError("item " + item.id + " has no keyword slots");

  std::mt19937_64 rng(text_seed(options.seed, item.id));
  std::vector<std::vector<std::string>> choices;
  for (const auto& slot : item.slots) {
    auto it = pools.find(slot.kind);
    if (it == pools.end()) throw ArgumentError("no replacement pool for slot kind " + slot.kind);
    std::vector<std::string> candidates;
    for (const auto& w : it->second) {
      if (normalize_text(w) == normalize_text(slot.text)) continue;
      bool is_keyword = false;
      for (const auto& k : item.answer_keywords) is_keyword |= contains_phrase(w, k);
      if (!is_keyword) candidates.push_back(w);
    }
    if (candidates.size() < options.per_slot) {
      throw ArgumentError("replacement pool '" + slot.kind + "' has " +
                          std::to_string(candidates.size()) + " usable words, need " +
                          std::to_string(options.per_slot));
    }
    std::vector<std::string> picked;
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(picked), options.per_slot,
                rng);
    choices.push_back(std::move(picked));
  }

  std::size_t total = 1;
  for (const auto& c : choices) total *= c.size();
  std::vector<std::size_t> combos(total);
  std::iota(combos.begin(), combos.end(), std::size_t{0});
  if (total > options.cap) {
    std::vector<std::size_t> kept;
    std::sample(combos.begin(), combos.end(), std::back_inserter(kept), options.cap, rng);
    combos = std::move(kept);
  }

  QAItem out = item;
  out.variants.clear();
  out.variant_answer_starts.clear();
  for (std::size_t combo : combos) {
    std::string question = item.question;
    std::string answer_start = item.answer_start;
    // Mixed-radix decode, first slot most significant.
    std::size_t rest = combo;
    std::vector<std::size_t> digits(choices.size());
    for (std::size_t s = choices.size(); s-- > 0;) {
      digits[s] = rest % choices[s].size();
      rest /= choices[s].size();
    }
    for (std::size_t s = 0; s < choices.size(); ++s) {
      question = replace_word(question, item.slots[s].text, choices[s][digits[s]]);
      answer_start = replace_word(answer_start, item.slots[s].text, choices[s][digits[s]]);
    }
    out.variants.push_back(std::move(question));
    out.variant_answer_starts.push_back(std::move(answer_start));
  }
  return out;
}

namespace {

nlohmann::json to_json(const QAItem& item) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : item.slots) slots.push_back({{"kind", s.kind}, {"text", s.text}});
  return {{"id", item.id},
          {"question", item.question},
          {"answer_keywords", item.answer_keywords},
          {"slots", slots},
          {"variants", item.variants},
          {"answer_start", item.answer_start},
          {"answer", item.answer},
          {"variant_answer_starts", item.variant_answer_starts},
          {"relation", item.relation},
          {"subject", item.subject},
          {"forget", item.forget}};
}

QAItem from_json(const nlohmann::json& j) {
  QAItem item;
  item.id = j.at("id").get<std::string>();
  item.question = j.at("question").get<std::string>();
  item.answer_keywords = j.at("answer_keywords").get<std::vector<std::string>>();
  for (const auto& s : j.at("slots")) {
    item.slots.push_back({s.at("kind").get<std::string>(), s.at("text").get<std::string>()});
  }
  item.variants = j.at("variants").get<std::vector<std::string>>();
  item.answer_start = j.at("answer_start").get<std::string>();
  item.answer = j.value("answer", std::string{});
  item.variant_answer_starts = j.value("variant_answer_starts", std::vector<std::string>{});
  if (item.variant_answer_starts.empty()) {
    item.variant_answer_starts.assign(item.variants.size(), item.answer_start);
  }
  if (item.variant_answer_starts.size() != item.variants.size()) {
    throw FormatError("item " + item.id + ": variant/answer-start count mismatch");
  }
  item.relation = j.value("relation", std::string{});
  item.subject = j.value("subject", std::string{});
  item.forget = j.value("forget", false);
  return item;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const std::vector<QAItem>& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArgumentError("cannot write dataset " + path.string());
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

std::vector<QAItem> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read dataset " + path.string());
  std::vector<QAItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      items.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

void write_corpus(const std::filesystem::path& path, const std::vector<std::string>& documents) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArgumentError("cannot write corpus " + path.string());
  for (const auto& d : documents) {
    if (d.find('\n') != std::string::npos) throw ArgumentError("document contains a newline");
    out << d << '\n';
  }
}

std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read corpus " + path.string());
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) docs.push_back(line);
  }
  return docs;
}

}  // namespace anonact::corpus
