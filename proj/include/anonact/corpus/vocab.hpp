#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace anonact::corpus {

// Word-level vocabulary with reserved pad/unk/end ids 0, 1, 2.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEnd = 2;

  Vocab();
  // Every word of every text, in sorted order after the reserved tokens.
  static Vocab build(std::span<const std::string> texts);
  // Rebuilds from an explicit id-ordered word list (reserved tokens first).
  static Vocab from_words(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  int id(std::string_view word) const;  // kUnk if absent
  const std::string& word(int id) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

// Lowercases and splits into word tokens: runs of letters/digits form a word,
// every other non-space character is its own token.
std::vector<std::string> split_words(std::string_view text);

// Throws DiagnosticError on a word missing from the vocabulary.
std::vector<int> tokenize(std::string_view text, const Vocab& vocab);

// Joins tokens; punctuation attaches to the preceding word and an apostrophe
// also to the following one. Reserved tokens are dropped.
std::string detokenize(std::span<const int> tokens, const Vocab& vocab);
std::string join_words(std::span<const std::string> words);

// Canonical form used by round-trip checks: detokenized word split.
std::string normalize_text(std::string_view text);

}  // namespace anonact::corpus
