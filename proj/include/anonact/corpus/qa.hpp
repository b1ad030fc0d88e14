#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anonact/corpus/universe.hpp"

namespace anonact::corpus {

// A word in the question (and answer start) that carries unlearned-domain
// information and is swapped during anonymization.
struct KeywordSlot {
  std::string kind;  // replacement pool, e.g. "person" or "place"
  std::string text;
  bool operator==(const KeywordSlot&) const = default;
};

struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> answer_keywords;  // primary keyword first, then aliases
  std::vector<KeywordSlot> slots;
  std::string answer_start;
  std::string answer;  // full answer sentence, answer_start + keyword + tail
  // Anonymized variants; each question is paired with its answer start.
  std::vector<std::string> variants;
  std::vector<std::string> variant_answer_starts;
  std::string relation;
  std::string subject;
  bool forget = false;

  bool operator==(const QAItem&) const = default;
};

// One item per fact, in fact order.
std::vector<QAItem> build_qa(const Universe& universe);

struct AnonymizeOptions {
  std::size_t per_slot = 5;  // R
  std::size_t cap = 64;
  std::uint64_t seed = 0;
};

using ReplacementPools = std::map<std::string, std::vector<std::string>>;

// Replaces every slot independently with R pool words and expands the cross
// product (R^S prompts), uniformly subsampled to `cap` when larger.
QAItem anonymize_question(const QAItem& item, const ReplacementPools& pools,
                          const AnonymizeOptions& options);

// Case-insensitive whole-word containment of a (possibly multi-word) phrase.
bool contains_phrase(const std::string& text, const std::string& phrase);

// Line-delimited JSON, one object per item.
void write_dataset(const std::filesystem::path& path, const std::vector<QAItem>& items);
std::vector<QAItem> read_dataset(const std::filesystem::path& path);

// Plain text, one document per line.
void write_corpus(const std::filesystem::path& path, const std::vector<std::string>& documents);
std::vector<std::string> read_corpus(const std::filesystem::path& path);

}  // namespace anonact::corpus
