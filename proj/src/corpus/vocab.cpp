#include "anonact/corpus/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "anonact/errors.hpp"

namespace anonact::corpus {

namespace {

const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<end>"};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool attaches_left(const std::string& w) {
  return w == "." || w == "," || w == "?" || w == "!" || w == ":" || w == ";" || w == "'";
}

}  // namespace

Vocab::Vocab() : words_(kReserved) {
  for (std::size_t i = 0; i < words_.size(); ++i) ids_.emplace(words_[i], static_cast<int>(i));
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  if (words.size() < kReserved.size() ||
      !std::equal(kReserved.begin(), kReserved.end(), words.begin())) {
    throw ArgumentError("vocabulary must start with the reserved tokens");
  }
  Vocab v;
  v.words_ = std::move(words);
  v.ids_.clear();
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.ids_.emplace(v.words_[i], static_cast<int>(i)).second) {
      throw ArgumentError("duplicate vocabulary word: " + v.words_[i]);
    }
  }
  return v;
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> unique;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) unique.insert(std::move(w));
  }
  std::vector<std::string> words = kReserved;
  for (const auto& w : unique) {
    if (std::find(kReserved.begin(), kReserved.end(), w) == kReserved.end()) words.push_back(w);
  }
  return from_words(std::move(words));
}

bool Vocab::contains(std::string_view word) const { return ids_.contains(std::string(word)); }

int Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (is_word_char(c)) {
      current.push_back(c);
      continue;
    }
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
    if (!std::isspace(static_cast<unsigned char>(c))) out.emplace_back(1, c);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) {
    const int id = vocab.id(w);
    if (id == Vocab::kUnk) {
      throw DiagnosticError("word '" + w + "' missing from vocabulary (corpus/pool mismatch)");
    }
    ids.push_back(id);
  }
  return ids;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  bool glue_next = false;
  for (const auto& w : words) {
    if (!out.empty() && !glue_next && !attaches_left(w)) out.push_back(' ');
    out += w;
    glue_next = (w == "'");
  }
  return out;
}

std::string detokenize(std::span<const int> tokens, const Vocab& vocab) {
  std::vector<std::string> words;
  for (int t : tokens) {
    if (t == Vocab::kPad || t == Vocab::kUnk || t == Vocab::kEnd) continue;
    words.push_back(vocab.word(t));
  }
  return join_words(words);
}

std::string normalize_text(std::string_view text) { return join_words(split_words(text)); }

}  // namespace anonact::corpus
