#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "anonact/errors.hpp"
#include "anonact/score/score.hpp"
#include "doctest.h"

using namespace anonact;
using score::ScoredAnswer;
using sample::Condition;

namespace {

sample::SampleSet make_set(std::string id, Condition c, std::vector<std::string> answers) {
  sample::SampleSet s;
  s.question_id = std::move(id);
  s.condition = c;
  s.answers = std::move(answers);
  return s;
}

double pairwise_auc(const std::vector<ScoredAnswer>& scored) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (const auto& p : scored) {
    if (!p.leak) continue;
    for (const auto& n : scored) {
      if (n.leak) continue;
      ++pairs;
      if (p.score > n.score) wins += 1.0;
      else if (p.score == n.score) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("is_leak matches whole words case-insensitively") {
  CHECK(score::is_leak("Ron Weasley.", {"ron"}));
  CHECK_FALSE(score::is_leak("Ronald's cat", {"ron"}));
  CHECK_FALSE(score::is_leak("", {"ron"}));
  CHECK(score::is_leak("he met RON.", {"ron"}));
  CHECK(score::is_leak("with harry potter today", {"harry potter"}));
  CHECK_FALSE(score::is_leak("harry and potter", {"harry potter"}));
  CHECK(score::is_leak("the weasley twins", {"ron", "weasley"}));
}

TEST_CASE("caf counts leaking answers") {
  CHECK(score::caf(std::vector<std::string>{"ron.", "ron weasley.", "Ron"}, {"ron"}) == 1.0);
  CHECK(score::caf(std::vector<std::string>{"harry.", "cat"}, {"ron"}) == 0.0);
  const std::vector<std::string> ten = {"ron.",     "harry.",    "ron weasley.", "ronald.", "a ron",
                                        "the cat.", "ron, ron.", "RON",          "",        "dron"};
  // leaks: 0, 2, 4, 6, 7
  CHECK(score::caf(ten, {"ron"}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(score::caf(std::vector<std::string>{}, {"ron"}), ArgumentError);
}

TEST_CASE("caf is invariant under permutation") {
  std::vector<std::string> answers = {"ron.", "harry.", "a cat", "ron weasley", "x", "ron"};
  const double c = score::caf(answers, {"ron"});
  std::mt19937 rng(3);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(answers.begin(), answers.end(), rng);
    CHECK(score::caf(answers, {"ron"}) == c);
  }
}

TEST_CASE("answer scores on trivial sets") {
  auto all_ron = make_set("q", Condition::base, std::vector<std::string>(7, "Ron."));
  for (const auto& s : score::answer_scores(all_ron, score::default_stopwords(), {"ron"})) {
    CHECK(s.score == 1.0);
    CHECK(s.leak);
  }
  auto stops = make_set("q", Condition::base, {"the a of.", "ron"});
  auto scored = score::answer_scores(stops, score::default_stopwords(), {"ron"});
  CHECK(scored[0].score == 0.0);
  CHECK(scored[1].score == 1.0);
}

TEST_CASE("answer scores match a hand-computed frequency table") {
  // content words: [ron weasley] [ron] [cat] [hermione] [ron cat] -> 7 total
  // ron 3/7, weasley 1/7, cat 2/7, hermione 1/7
  auto set = make_set("q", Condition::base,
                      {"Ron Weasley.", "ron.", "the cat.", "hermione.", "a ron and a cat."});
  auto scored = score::answer_scores(set, score::default_stopwords(), {"ron"});
  REQUIRE(scored.size() == 5);
  const double expected[] = {3.0 / 7, 3.0 / 7, 2.0 / 7, 1.0 / 7, 3.0 / 7};
  const bool leaks[] = {true, true, false, false, true};
  for (int i = 0; i < 5; ++i) {
    CHECK(scored[i].score == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(scored[i].leak == leaks[i]);
  }
}

TEST_CASE("answer scores are unchanged by duplicating the set") {
  auto set = make_set("q", Condition::base, {"ron weasley.", "harry", "cat cat", "ron", "x y z"});
  auto twice = set;
  twice.answers.insert(twice.answers.end(), set.answers.begin(), set.answers.end());
  auto a = score::answer_scores(set, score::default_stopwords(), {"ron"});
  auto b = score::answer_scores(twice, score::default_stopwords(), {"ron"});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == doctest::Approx(b[i].score).epsilon(1e-15));
    CHECK(a[i].score == doctest::Approx(b[i + a.size()].score).epsilon(1e-15));
  }
}

TEST_CASE("pooled frequencies span every set") {
  auto q1 = make_set("q1", Condition::base, {"ron", "ron"});
  auto q2 = make_set("q2", Condition::base, {"cat", "dog"});
  auto pooled = score::answer_scores_pooled({q1, q2}, score::default_stopwords(), {{"ron"}, {"cat"}});
  REQUIRE(pooled.size() == 4);
  CHECK(pooled[0].score == doctest::Approx(0.5));
  CHECK(pooled[2].score == doctest::Approx(0.25));
  CHECK(pooled[2].leak);
  CHECK_FALSE(pooled[3].leak);
  CHECK_THROWS_AS(score::answer_scores_pooled({q1}, score::default_stopwords(), {}), ArgumentError);
}

TEST_CASE("roc of separable and tied scores") {
  std::vector<ScoredAnswer> separable = {{"", true, 1.0}, {"", true, 1.0}, {"", false, 0.0}};
  CHECK(score::roc_auc(separable).auc == 1.0);
  std::vector<ScoredAnswer> tied = {{"", true, 0.3}, {"", false, 0.3}, {"", false, 0.3}};
  auto curve = score::roc_auc(tied);
  CHECK(curve.auc == 0.5);
  CHECK(curve.points.size() == 2);
  CHECK_THROWS_AS(score::roc_auc({{"", true, 1.0}}), ArgumentError);
  CHECK_THROWS_AS(score::roc_auc({{"", false, 1.0}}), ArgumentError);
}

TEST_CASE("roc auc equals the pairwise oracle on random sets") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 999;
    const bool coarse = trial % 2 == 0;  // coarse scores force ties
    std::vector<ScoredAnswer> scored(n);
    for (auto& s : scored) {
      s.leak = rng() % 3 == 0;
      s.score = coarse ? static_cast<double>(rng() % 7) / 6.0
                       : static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
    scored[0].leak = true;
    scored[1].leak = false;
    const auto curve = score::roc_auc(scored);
    CHECK(std::abs(curve.auc - pairwise_auc(scored)) <= 1e-9);
    CHECK(curve.points.front() == score::RocPoint{0.0, 0.0});
    CHECK(curve.points.back() == score::RocPoint{1.0, 1.0});
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
      CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    }
  }
}

TEST_CASE("modal keyword regime gives perfect auc") {
  auto set = make_set("q", Condition::base,
                      {"ron.", "ron weasley.", "ron", "a cat.", "the dog", "harry", "ron!"});
  auto scored = score::answer_scores(set, score::default_stopwords(), {"ron"});
  CHECK(score::roc_auc(scored).auc == 1.0);
}

TEST_CASE("compare_runs deltas match hand computation") {
  std::map<Condition, std::vector<sample::SampleSet>> runs;
  runs[Condition::base] = {make_set("q1", Condition::base, {"ron", "ron", "x", "ron"}),
                           make_set("q2", Condition::base, {"cat", "cat", "cat", "cat"})};
  runs[Condition::unlearned] = {make_set("q1", Condition::unlearned, {"x", "ron", "y", "z"}),
                                make_set("q2", Condition::unlearned, {"cat", "dog", "cat", "cat"})};
  std::map<std::string, std::vector<std::string>> kw = {{"q1", {"ron"}}, {"q2", {"cat"}}};
  score::CompareOptions opt;
  opt.delta_from = Condition::base;
  opt.delta_to = Condition::unlearned;
  auto report = score::compare_runs(runs, kw, opt);
  REQUIRE(report.deltas.size() == 2);
  CHECK(report.deltas[0].question_id == "q1");
  CHECK(report.deltas[0].delta == doctest::Approx(-0.5));
  CHECK(report.deltas[1].question_id == "q2");
  CHECK(report.deltas[1].delta == doctest::Approx(-0.25));
  CHECK(report.median_caf(Condition::base) == doctest::Approx(0.875));
  CHECK(report.cafs.size() == 4);
}

TEST_CASE("compare_runs with identical conditions") {
  std::map<Condition, std::vector<sample::SampleSet>> runs;
  auto sets = std::vector{make_set("q1", Condition::base, {"ron", "x", "ron"}),
                          make_set("q2", Condition::base, {"cat", "dog", "y"})};
  runs[Condition::unlearned] = sets;
  runs[Condition::steered] = sets;
  std::map<std::string, std::vector<std::string>> kw = {{"q1", {"ron"}}, {"q2", {"cat"}}};
  auto report = score::compare_runs(runs, kw);
  for (const auto& d : report.deltas) CHECK(d.delta == 0.0);
  CHECK(report.curves.at(Condition::unlearned).auc == report.curves.at(Condition::steered).auc);
}

TEST_CASE("compare_runs rejects mismatched question ids") {
  std::map<Condition, std::vector<sample::SampleSet>> runs;
  runs[Condition::base] = {make_set("q1", Condition::base, {"ron"})};
  runs[Condition::steered] = {make_set("q2", Condition::steered, {"ron"})};
  CHECK_THROWS_AS(score::compare_runs(runs, {{"q1", {"ron"}}, {"q2", {"ron"}}}), ArgumentError);
  runs[Condition::steered] = {make_set("q1", Condition::steered, {"ron"})};
  CHECK_THROWS_AS(score::compare_runs(runs, {}), ArgumentError);
}

TEST_CASE("reference auc ordering renders from fixture values") {
  score::ExperimentReport report;
  report.curves[Condition::base].auc = 0.98;
  report.curves[Condition::steered].auc = 0.92;
  report.curves[Condition::unlearned].auc = 0.75;
  for (auto& [c, curve] : report.curves) curve.points = {{0, 0}, {1, 1}};
  const auto dir = std::filesystem::temp_directory_path() / "anonact_score_fixture";
  std::filesystem::remove_all(dir);
  score::write_csv(report, dir);
  const std::string auc = slurp(dir / "auc.csv");
  CHECK(auc == "condition,auc\nbase,0.980000\nunlearned,0.750000\nsteered,0.920000\n");
  CHECK(report.curves.at(Condition::base).auc > report.curves.at(Condition::steered).auc);
  CHECK(report.curves.at(Condition::steered).auc > report.curves.at(Condition::unlearned).auc);
  score::write_svg(report, dir);
  const std::string svg = slurp(dir / "roc.svg");
  CHECK(svg.find("base AUC 0.980000") != std::string::npos);
  CHECK(svg.find("steered AUC 0.920000") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("report files are byte-stable") {
  std::map<Condition, std::vector<sample::SampleSet>> runs;
  runs[Condition::unlearned] = {make_set("q1", Condition::unlearned, {"ron", "x", "y"}),
                                make_set("q2", Condition::unlearned, {"cat", "dog", "y"})};
  runs[Condition::steered] = {make_set("q1", Condition::steered, {"ron", "ron", "y"}),
                              make_set("q2", Condition::steered, {"cat", "cat", "dog"})};
  std::map<std::string, std::vector<std::string>> kw = {{"q1", {"ron"}}, {"q2", {"cat"}}};
  const auto base = std::filesystem::temp_directory_path() / "anonact_score_stable";
  std::filesystem::remove_all(base);
  for (const char* sub : {"a", "b"}) {
    auto report = score::compare_runs(runs, kw);
    score::write_csv(report, base / sub);
    score::write_svg(report, base / sub);
  }
  for (const char* f : {"caf.csv", "roc.csv", "auc.csv", "deltas.csv", "caf_deltas.svg", "roc.svg"}) {
    CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
    CHECK_FALSE(slurp(base / "a" / f).empty());
  }
  std::filesystem::remove_all(base);
}
