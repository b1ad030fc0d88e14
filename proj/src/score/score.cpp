#include "anonact/score/score.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "anonact/corpus/qa.hpp"
#include "anonact/corpus/vocab.hpp"
#include "anonact/errors.hpp"

namespace anonact::score {

using sample::Condition;

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "the",  "and",  "or",   "but",   "if",   "of",   "at",   "by",
      "for",  "with", "about", "to",  "from", "in",    "on",   "into", "over", "under",
      "is",   "are",  "was",  "were", "be",   "been",  "being", "am",  "has",  "have",
      "had",  "do",   "does", "did",  "it",   "its",   "this", "that", "these", "those",
      "he",   "she",  "they", "his",  "her",  "their", "as",   "so",   "not",  "no",
      "s",    "who",  "what", "which", "where"};
  return words;
}

bool is_leak(const std::string& answer, const std::vector<std::string>& keywords) {
  return std::any_of(keywords.begin(), keywords.end(),
                     [&](const std::string& k) { return corpus::contains_phrase(answer, k); });
}

double caf(const std::vector<std::string>& answers, const std::vector<std::string>& keywords) {
  if (answers.empty()) throw ArgumentError("CAF of an empty sample set");
  std::size_t hits = 0;
  for (const auto& a : answers) hits += is_leak(a, keywords) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(answers.size());
}

double caf(const sample::SampleSet& samples, const std::vector<std::string>& keywords) {
  return caf(samples.answers, keywords);
}

std::vector<std::string> content_words(const std::string& answer,
                                       const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (auto& w : corpus::split_words(answer)) {
    const bool has_alnum = std::any_of(w.begin(), w.end(), [](unsigned char c) {
      return std::isalnum(c) != 0;
    });
    if (has_alnum && !stopwords.contains(w)) out.push_back(std::move(w));
  }
  return out;
}

std::string to_string(FrequencyMode m) {
  return m == FrequencyMode::pooled ? "pooled" : "per_question";
}

FrequencyMode parse_frequency_mode(const std::string& s) {
  if (s == "pooled") return FrequencyMode::pooled;
  if (s == "per_question") return FrequencyMode::per_question;
  throw ArgumentError("unknown frequency mode '" + s + "'");
}

namespace {

struct Counts {
  std::map<std::string, std::size_t> occurrences;
  std::size_t total = 0;

  void add(const std::vector<std::string>& words) {
    for (const auto& w : words) ++occurrences[w];
    total += words.size();
  }
  double frequency(const std::string& w) const {
    auto it = occurrences.find(w);
    return it == occurrences.end() || total == 0
               ? 0.0
               : static_cast<double>(it->second) / static_cast<double>(total);
  }
};

std::vector<ScoredAnswer> score_with(const Counts& counts, const sample::SampleSet& samples,
                                     const std::set<std::string>& stopwords,
                                     const std::vector<std::string>& keywords) {
  std::vector<ScoredAnswer> out;
  out.reserve(samples.answers.size());
  for (const auto& a : samples.answers) {
    ScoredAnswer s{a, is_leak(a, keywords), 0.0};
    for (const auto& w : content_words(a, stopwords)) s.score = std::max(s.score, counts.frequency(w));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<ScoredAnswer> answer_scores(const sample::SampleSet& samples,
                                        const std::set<std::string>& stopwords,
                                        const std::vector<std::string>& keywords) {
  Counts counts;
  for (const auto& a : samples.answers) counts.add(content_words(a, stopwords));
  return score_with(counts, samples, stopwords, keywords);
}

std::vector<ScoredAnswer> answer_scores_pooled(
    const std::vector<sample::SampleSet>& sets, const std::set<std::string>& stopwords,
    const std::vector<std::vector<std::string>>& keywords) {
  if (sets.size() != keywords.size()) throw ArgumentError("one keyword list per sample set");
  Counts counts;
  for (const auto& set : sets) {
    for (const auto& a : set.answers) counts.add(content_words(a, stopwords));
  }
  std::vector<ScoredAnswer> out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto part = score_with(counts, sets[i], stopwords, keywords[i]);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

RocCurve roc_auc(const std::vector<ScoredAnswer>& scored) {
  std::size_t pos = 0;
  for (const auto& s : scored) pos += s.leak ? 1 : 0;
  const std::size_t neg = scored.size() - pos;
  if (pos == 0 || neg == 0) {
    throw ArgumentError("AUC undefined: need both leaking and non-leaking answers");
  }
  std::vector<std::pair<double, bool>> order;
  order.reserve(scored.size());
  for (const auto& s : scored) order.emplace_back(s.score, s.leak);
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area in count units
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t dtp = 0, dfp = 0;
    const double threshold = order[i].first;
    for (; i < order.size() && order[i].first == threshold; ++i) {
      (order[i].second ? dtp : dfp) += 1;
    }
    area2 += static_cast<double>(dfp) * static_cast<double>(2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double ExperimentReport::median_caf(Condition c) const {
  std::vector<double> v;
  for (const auto& row : cafs) {
    if (row.condition == c) v.push_back(row.caf);
  }
  return median(std::move(v));
}

std::vector<Condition> ExperimentReport::conditions() const {
  std::set<Condition> seen;
  for (const auto& row : cafs) seen.insert(row.condition);
  return {seen.begin(), seen.end()};
}

ExperimentReport compare_runs(const std::map<Condition, std::vector<sample::SampleSet>>& runs,
                              const std::map<std::string, std::vector<std::string>>& keywords,
                              const CompareOptions& options) {
  if (runs.empty()) throw ArgumentError("compare_runs needs at least one condition");
  const auto ids_of = [](const std::vector<sample::SampleSet>& sets) {
    std::vector<std::string> ids;
    for (const auto& s : sets) ids.push_back(s.question_id);
    return ids;
  };
  const std::vector<std::string> ids = ids_of(runs.begin()->second);
  {
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw ArgumentError("duplicate question id in a condition");
  }
  for (const auto& [cond, sets] : runs) {
    auto other = ids_of(sets);
    if (other != ids) {
      throw ArgumentError("condition " + sample::to_string(cond) +
                          " covers different question ids");
    }
  }
  const auto keywords_for = [&](const std::string& id) -> const std::vector<std::string>& {
    auto it = keywords.find(id);
    if (it == keywords.end()) throw ArgumentError("no keywords for question " + id);
    return it->second;
  };

  ExperimentReport report;
  report.delta_from = options.delta_from;
  report.delta_to = options.delta_to;
  for (std::size_t q = 0; q < ids.size(); ++q) {
    for (const auto& [cond, sets] : runs) {
      report.cafs.push_back({ids[q], cond, caf(sets[q], keywords_for(ids[q])),
                             sets[q].answers.size()});
    }
  }
  for (const auto& [cond, sets] : runs) {
    std::vector<ScoredAnswer> pooled;
    if (options.mode == FrequencyMode::pooled) {
      std::vector<std::vector<std::string>> kw;
      for (const auto& s : sets) kw.push_back(keywords_for(s.question_id));
      pooled = answer_scores_pooled(sets, options.stopwords, kw);
    } else {
      for (const auto& s : sets) {
        auto part = answer_scores(s, options.stopwords, keywords_for(s.question_id));
        pooled.insert(pooled.end(), part.begin(), part.end());
      }
    }
    const bool both = std::any_of(pooled.begin(), pooled.end(), [](auto& s) { return s.leak; }) &&
                      std::any_of(pooled.begin(), pooled.end(), [](auto& s) { return !s.leak; });
    if (both) report.curves.emplace(cond, roc_auc(pooled));
    report.scored.emplace(cond, std::move(pooled));
  }
  if (runs.contains(options.delta_from) && runs.contains(options.delta_to)) {
    for (const auto& id : ids) {
      double from = 0, to = 0;
      for (const auto& row : report.cafs) {
        if (row.question_id != id) continue;
        if (row.condition == options.delta_from) from = row.caf;
        if (row.condition == options.delta_to) to = row.caf;
      }
      report.deltas.push_back({id, from, to, to - from});
    }
    std::stable_sort(report.deltas.begin(), report.deltas.end(), [](const auto& a, const auto& b) {
      return a.delta != b.delta ? a.delta < b.delta : a.question_id < b.question_id;
    });
  }
  report.manifest["frequency_mode"] = to_string(options.mode);
  return report;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StateError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_csv(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "caf.csv");
    out << "question_id,condition,caf,n_samples\n";
    for (const auto& r : report.cafs) {
      out << r.question_id << ',' << sample::to_string(r.condition) << ',' << format_number(r.caf)
          << ',' << r.samples << '\n';
    }
  }
  {
    auto out = open_out(dir / "roc.csv");
    out << "condition,fpr,tpr\n";
    for (const auto& [cond, curve] : report.curves) {
      for (const auto& p : curve.points) {
        out << sample::to_string(cond) << ',' << format_number(p.fpr) << ','
            << format_number(p.tpr) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "auc.csv");
    out << "condition,auc\n";
    for (const auto& [cond, curve] : report.curves) {
      out << sample::to_string(cond) << ',' << format_number(curve.auc) << '\n';
    }
  }
  {
    auto out = open_out(dir / "deltas.csv");
    out << "question_id," << sample::to_string(report.delta_from) << ','
        << sample::to_string(report.delta_to) << ",delta\n";
    for (const auto& d : report.deltas) {
      out << d.question_id << ',' << format_number(d.from) << ',' << format_number(d.to) << ','
          << format_number(d.delta) << '\n';
    }
  }
}

namespace {

const char* color_of(Condition c) {
  switch (c) {
    case Condition::base: return "#1f77b4";
    case Condition::unlearned: return "#d62728";
    case Condition::steered: return "#2ca02c";
  }
  return "#000000";
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_svg(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    const double w = 640, h = 320, left = 50, bottom = 40, top = 20;
    const double plot_h = h - bottom - top;
    const std::size_t n = std::max<std::size_t>(report.deltas.size(), 1);
    const double slot = (w - left - 10) / static_cast<double>(n);
    auto out = open_out(dir / "caf_deltas.svg");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(w) << "\" height=\""
        << fixed(h) << "\">\n";
    out << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(h - bottom) << "\" x2=\""
        << fixed(w - 10) << "\" y2=\"" << fixed(h - bottom) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"5\" y=\"" << fixed(top + 10) << "\" font-size=\"10\">CAF</text>\n";
    for (std::size_t i = 0; i < report.deltas.size(); ++i) {
      const auto& d = report.deltas[i];
      const double x = left + slot * static_cast<double>(i);
      const double bw = slot * 0.4;
      const double h_from = d.from * plot_h, h_to = d.to * plot_h;
      out << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(h - bottom - h_from) << "\" width=\""
          << fixed(bw) << "\" height=\"" << fixed(h_from) << "\" fill=\""
          << color_of(report.delta_from) << "\"/>\n";
      out << "<rect x=\"" << fixed(x + bw) << "\" y=\"" << fixed(h - bottom - h_to)
          << "\" width=\"" << fixed(bw) << "\" height=\"" << fixed(h_to) << "\" fill=\""
          << color_of(report.delta_to) << "\"/>\n";
    }
    out << "<text x=\"" << fixed(left) << "\" y=\"" << fixed(h - 10) << "\" font-size=\"10\">"
        << sample::to_string(report.delta_from) << " vs " << sample::to_string(report.delta_to)
        << ", sorted by delta</text>\n";
    out << "</svg>\n";
  }
  {
    const double size = 320, margin = 40, span = size - 2 * margin;
    auto out = open_out(dir / "roc.svg");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(size) << "\" height=\""
        << fixed(size) << "\">\n";
    out << "<rect x=\"" << fixed(margin) << "\" y=\"" << fixed(margin) << "\" width=\""
        << fixed(span) << "\" height=\"" << fixed(span)
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << fixed(margin) << "\" y1=\"" << fixed(margin + span) << "\" x2=\""
        << fixed(margin + span) << "\" y2=\"" << fixed(margin)
        << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
    double legend_y = margin + 12;
    for (const auto& [cond, curve] : report.curves) {
      out << "<polyline fill=\"none\" stroke=\"" << color_of(cond) << "\" points=\"";
      for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (i) out << ' ';
        out << fixed(margin + curve.points[i].fpr * span) << ','
            << fixed(margin + span - curve.points[i].tpr * span);
      }
      out << "\"/>\n";
      out << "<text x=\"" << fixed(margin + span * 0.45) << "\" y=\"" << fixed(legend_y + span * 0.6)
          << "\" font-size=\"10\" fill=\"" << color_of(cond) << "\">" << sample::to_string(cond)
          << " AUC " << format_number(curve.auc) << "</text>\n";
      legend_y += 12;
    }
    out << "</svg>\n";
  }
}

}  // namespace anonact::score
