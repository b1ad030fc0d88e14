#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "anonact/sample/sample.hpp"

namespace anonact::score {

struct ScoredAnswer {
  std::string answer;
  bool leak = false;
  double score = 0.0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Fixed English function-word list.
const std::set<std::string>& default_stopwords();

// Any keyword occurs as a whole-word phrase, case-insensitive.
bool is_leak(const std::string& answer, const std::vector<std::string>& keywords);

double caf(const sample::SampleSet& samples, const std::vector<std::string>& keywords);
double caf(const std::vector<std::string>& answers, const std::vector<std::string>& keywords);

// Lowercased words of an answer with punctuation and stop words removed.
std::vector<std::string> content_words(const std::string& answer,
                                       const std::set<std::string>& stopwords);

enum class FrequencyMode { per_question, pooled };
std::string to_string(FrequencyMode m);
FrequencyMode parse_frequency_mode(const std::string& s);

// Word frequencies over this set only; score = max frequency among the
// answer's content words, 0 when it has none.
std::vector<ScoredAnswer> answer_scores(const sample::SampleSet& samples,
                                        const std::set<std::string>& stopwords,
                                        const std::vector<std::string>& keywords);

// Frequencies shared across every set. keywords[i] belongs to sets[i].
std::vector<ScoredAnswer> answer_scores_pooled(
    const std::vector<sample::SampleSet>& sets, const std::set<std::string>& stopwords,
    const std::vector<std::vector<std::string>>& keywords);

// Threshold sweep over distinct scores, descending, ties entering together;
// trapezoidal area. Throws ArgumentError when only one class is present.
RocCurve roc_auc(const std::vector<ScoredAnswer>& scored);

struct CafRow {
  std::string question_id;
  sample::Condition condition = sample::Condition::base;
  double caf = 0.0;
  std::size_t samples = 0;
};

struct CafDelta {
  std::string question_id;
  double from = 0.0;
  double to = 0.0;
  double delta = 0.0;
};

struct ExperimentReport {
  std::vector<CafRow> cafs;  // question order, then condition order
  std::map<sample::Condition, std::vector<ScoredAnswer>> scored;
  std::map<sample::Condition, RocCurve> curves;
  std::vector<CafDelta> deltas;  // ascending by delta, ties by id
  sample::Condition delta_from = sample::Condition::unlearned;
  sample::Condition delta_to = sample::Condition::steered;
  std::map<std::string, std::string> manifest;

  double median_caf(sample::Condition c) const;
  std::vector<sample::Condition> conditions() const;
};

struct CompareOptions {
  FrequencyMode mode = FrequencyMode::per_question;
  std::set<std::string> stopwords = default_stopwords();
  sample::Condition delta_from = sample::Condition::unlearned;
  sample::Condition delta_to = sample::Condition::steered;
};

// runs: condition -> one SampleSet per question. keywords: question id ->
// accepted keywords. Every condition must cover the same question ids.
ExperimentReport compare_runs(const std::map<sample::Condition, std::vector<sample::SampleSet>>& runs,
                              const std::map<std::string, std::vector<std::string>>& keywords,
                              const CompareOptions& options = {});

double median(std::vector<double> values);

// caf.csv, roc.csv, auc.csv, deltas.csv
void write_csv(const ExperimentReport& report, const std::filesystem::path& dir);
// caf_deltas.svg (bar pairs sorted by delta), roc.svg (overlaid curves)
void write_svg(const ExperimentReport& report, const std::filesystem::path& dir);

std::string format_number(double v);

}  // namespace anonact::score
