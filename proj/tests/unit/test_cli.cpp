#include <filesystem>
#include <fstream>
#include <sstream>

#include "anonact/cli/config.hpp"
#include "anonact/cli/manifest.hpp"
#include "anonact/cli/pipeline.hpp"
#include "anonact/corpus/qa.hpp"
#include "anonact/errors.hpp"
#include "anonact/sample/sample.hpp"
#include "doctest.h"

using namespace anonact;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("anonact_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

cli::ExperimentConfig tiny_config() {
  auto c = cli::preset("narrow");
  c.name = "tiny";
  c.corpus.forget_entities = 2;
  c.corpus.retain_entities = 2;
  c.corpus.facts_per_entity = 3;
  c.corpus.per_slot = 5;
  c.corpus.cap = 6;
  c.model.d_model = 32;
  c.model.n_layers = 3;
  c.model.context_len = 40;
  c.train.epochs = 300;
  c.train.batch_size = 4;
  c.train.learning_rate = 1e-2;
  c.decode.samples = 40;
  c.decode.top_m = 8;
  c.ablate.coefficients = {0.0, 1.0, 2.0, 4.0};
  return c;
}

// One pipeline run shared by the tests below.
const fs::path& tiny_run() {
  static const fs::path dir = [] {
    auto d = scratch("tiny");
    cli::run_experiment(tiny_config(), d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("config text round-trips and rejects unknown keys") {
  const auto c = tiny_config();
  const auto text = cli::to_ini(c);
  const auto back = cli::parse_config(text, cli::ExperimentConfig{});
  CHECK(cli::to_ini(back) == text);
  CHECK_THROWS_AS(cli::parse_config("[model]\nwidth = 3\n", {}), ArgumentError);
  CHECK_THROWS_AS(cli::parse_config("[bogus]\nx = 1\n", {}), ArgumentError);
  CHECK_THROWS_AS(cli::parse_config("[model]\nd_model = many\n", {}), ArgumentError);
  const auto partial = cli::parse_config("[steer]\ncoefficient = 4\nlayers = 0,1\n", c);
  CHECK(partial.steer.coefficient == 4.0);
  CHECK(partial.steer.layers == std::vector<std::size_t>{0, 1});
  CHECK(partial.model.d_model == 32);
}

TEST_CASE("presets and validation") {
  for (const auto& name : cli::preset_names()) CHECK_NOTHROW(cli::preset(name).validate());
  CHECK(cli::preset("narrow").corpus.breadth == corpus::Breadth::narrow);
  CHECK(cli::preset("replacement").unlearn.method == train::UnlearnMethod::replacement);
  CHECK_THROWS_AS(cli::preset("medium"), ArgumentError);
  auto c = cli::preset("broad");
  CHECK(c.steer_layers() == std::vector<std::size_t>{2});
  CHECK(c.ablate_layers() == std::vector<std::size_t>{0, 1, 2});
  c.steer.layers = {4};
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = cli::preset("broad");
  c.decode.samples = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = cli::preset("broad");
  c.corpus.per_slot = 3;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  CHECK(cli::parse_double_list("0, 1.5,4") == std::vector<double>{0.0, 1.5, 4.0});
  CHECK_THROWS_AS(cli::parse_size_list("1,x"), ArgumentError);
}

TEST_CASE("stage seeds are distinct and follow the master seed") {
  auto c = cli::preset("broad");
  const std::vector<std::uint64_t> s = {cli::seeds::corpus(c), cli::seeds::anonymize(c), cli::seeds::model_init(c),
                                        cli::seeds::train(c),  cli::seeds::probe(c),     cli::seeds::unlearn(c),
                                        cli::seeds::decode(c)};
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) CHECK(s[i] != s[j]);
  }
  c.seed = 2;
  CHECK(cli::seeds::corpus(c) != s[0]);
}

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = scratch("sha");
  fs::create_directories(dir);
  std::ofstream(dir / "f", std::ios::binary) << "abc";
  CHECK(cli::sha256_file(dir / "f") == cli::sha256_hex("abc"));
  CHECK_THROWS_AS(cli::sha256_file(dir / "missing"), StateError);
}

TEST_CASE("manifest files round-trip") {
  const auto dir = scratch("manifest");
  fs::create_directories(dir);
  cli::RunManifest m;
  m.experiment = "x";
  m.seed = 7;
  m.seeds = {{"corpus", 11}, {"decode", 12}};
  m.config_path = "config.ini";
  m.put({"train", "h1", cli::StageStatus::complete, "t0", "t1", {{"a", "00"}}, {{"b", "11"}}, ""});
  m.put({"unlearn", "h2", cli::StageStatus::failed, "t2", "t3", {}, {}, "boom"});
  m.put({"train", "h3", cli::StageStatus::complete, "t4", "t5", {}, {}, ""});
  CHECK(m.stages.size() == 2);
  CHECK(m.find("train")->config_hash == "h3");
  cli::write_manifest(dir / "m.json", m);
  const auto back = cli::read_manifest(dir / "m.json");
  CHECK(back.seeds == m.seeds);
  CHECK(back.stages[1].status == cli::StageStatus::failed);
  CHECK(back.stages[1].message == "boom");
  std::ofstream(dir / "bad.json") << "{\"experiment\": 1}";
  CHECK_THROWS_AS(cli::read_manifest(dir / "bad.json"), FormatError);
  CHECK_THROWS_AS(cli::read_manifest(dir / "none.json"), StateError);
}

TEST_CASE("a run produces every artifact with matching hashes") {
  const auto& dir = tiny_run();
  const auto m = cli::read_manifest(dir / cli::kManifestFile);
  CHECK(m.stages.size() == cli::stage_names().size());
  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    CHECK(m.stages[i].name == cli::stage_names()[i]);
    CHECK(m.stages[i].status == cli::StageStatus::complete);
  }
  CHECK(m.verify(dir));
  CHECK(m.seeds.at("decode") == cli::seeds::decode(tiny_config()));
  for (const auto* f : {"caf.csv", "roc.csv", "auc.csv", "deltas.csv", "caf_deltas.svg", "roc.svg", "summary.txt"}) {
    CHECK(fs::exists(dir / "report" / f));
  }
  const auto s = cli::summarize(dir);
  CHECK(s.conditions.size() == 3);
}

TEST_CASE("rerunning an unchanged config skips every stage") {
  const auto& dir = tiny_run();
  const auto before = slurp(dir / cli::kManifestFile);
  std::vector<std::string> log;
  cli::run_experiment(tiny_config(), dir, {.until = "", .log = [&](const std::string& s) { log.push_back(s); }});
  CHECK(slurp(dir / cli::kManifestFile) == before);
  REQUIRE(log.size() == cli::stage_names().size());
  for (const auto& line : log) CHECK(line.find("skipped") != std::string::npos);
}

TEST_CASE("a damaged artifact is regenerated byte for byte") {
  const auto& dir = tiny_run();
  const auto original = slurp(dir / "vectors.bin");
  std::ofstream(dir / "vectors.bin", std::ios::binary | std::ios::trunc) << "junk";
  CHECK_FALSE(cli::read_manifest(dir / cli::kManifestFile).verify(dir));
  std::vector<std::string> ran;
  cli::run_experiment(tiny_config(), dir, {.until = "", .log = [&](const std::string& s) {
                                             if (s.find("running") != std::string::npos) ran.push_back(s);
                                           }});
  CHECK(ran == std::vector<std::string>{"steer: running"});
  CHECK(slurp(dir / "vectors.bin") == original);
  CHECK(cli::read_manifest(dir / cli::kManifestFile).verify(dir));
}

TEST_CASE("changing one section reruns only the stages that read it") {
  const auto dir = scratch("partial");
  fs::copy(tiny_run(), dir, fs::copy_options::recursive);
  auto c = tiny_config();
  c.decode.samples = 20;
  std::vector<std::string> ran;
  cli::run_experiment(c, dir, {.until = "", .log = [&](const std::string& s) {
                                 if (s.find("running") != std::string::npos) ran.push_back(s);
                               }});
  CHECK(ran == std::vector<std::string>{"sample: running", "score: running", "report: running"});
  for (const auto& set : sample::read_samples(dir / "samples.jsonl")) CHECK(set.answers.size() == 20);
}

TEST_CASE("report emission is byte-stable and consistent with the csv") {
  const auto& dir = tiny_run();
  std::map<std::string, std::string> before;
  for (const auto& e : fs::directory_iterator(dir / "report")) before[e.path().filename()] = slurp(e.path());
  cli::emit_report(dir);
  for (const auto& [name, bytes] : before) CHECK(slurp(dir / "report" / name) == bytes);

  const auto s = cli::summarize(dir);
  std::ifstream auc(dir / "report" / "auc.csv");
  std::string line;
  std::getline(auc, line);
  std::size_t rows = 0;
  while (std::getline(auc, line)) {
    const auto comma = line.find(',');
    const auto cond = sample::parse_condition(line.substr(0, comma));
    CHECK(s.auc.at(cond) == line.substr(comma + 1));
    ++rows;
  }
  CHECK(rows > 0);

  // Count of steered > unlearned recomputed from caf.csv.
  std::map<std::string, std::map<std::string, double>> caf;
  std::ifstream cafs(dir / "report" / "caf.csv");
  std::getline(cafs, line);
  while (std::getline(cafs, line)) {
    std::istringstream ss(line);
    std::string id, cond, value;
    std::getline(ss, id, ',');
    std::getline(ss, cond, ',');
    std::getline(ss, value, ',');
    caf[id][cond] = std::stod(value);
  }
  std::size_t above = 0;
  for (auto& [id, row] : caf) above += row["steered"] > row["unlearned"];
  CHECK(s.steered_above_unlearned == above);
  CHECK(s.questions == caf.size());
  CHECK(slurp(dir / "report" / "summary.txt") == cli::format_summary(s));
}

TEST_CASE("summary flags no improvement when steering does not raise the median") {
  const auto dir = scratch("flag");
  fs::create_directories(dir);
  auto c = tiny_config();
  std::ofstream(dir / cli::kConfigFile) << cli::to_ini(c);
  corpus::QAItem a, b;
  a.id = "a-home";
  a.answer_keywords = {"thornmere"};
  b.id = "b-home";
  b.answer_keywords = {"ashfall"};
  corpus::write_dataset(dir / "qa.jsonl", {a, b});
  auto set = [](const std::string& id, sample::Condition c, std::vector<std::string> answers) {
    sample::SampleSet s;
    s.question_id = id;
    s.condition = c;
    s.answers = std::move(answers);
    s.seeds.assign(s.answers.size(), 0);
    return s;
  };
  using sample::Condition;
  // Steering lifts one question and drops the other: medians tie.
  sample::write_samples(dir / "samples.jsonl",
                        {set("a-home", Condition::base, {"thornmere.", "thornmere."}),
                         set("a-home", Condition::unlearned, {"thornmere.", "x."}),
                         set("a-home", Condition::steered, {"thornmere.", "thornmere."}),
                         set("b-home", Condition::base, {"ashfall.", "ashfall."}),
                         set("b-home", Condition::unlearned, {"ashfall.", "y."}),
                         set("b-home", Condition::steered, {"y.", "z."})});
  std::ofstream(dir / "distributions.jsonl");
  auto s = cli::summarize(dir);
  CHECK(s.median_caf[Condition::unlearned] == 0.5);
  CHECK(s.median_caf[Condition::steered] == 0.5);
  CHECK(s.steered_above_unlearned == 1);
  CHECK(s.no_improvement);
  CHECK(cli::format_summary(s).find("verdict no improvement") != std::string::npos);
}

TEST_CASE("emit_report needs a completed score stage") {
  const auto dir = scratch("noscore");
  cli::run_experiment(tiny_config(), dir, {.until = "gen-corpus", .log = {}});
  CHECK_THROWS_AS(cli::emit_report(dir), StateError);
  CHECK_THROWS_AS(cli::run_ablation(dir), StateError);
  CHECK_THROWS_AS(cli::run_experiment(tiny_config(), dir, {.until = "nope", .log = {}}), ArgumentError);
}

TEST_CASE("a failing stage is recorded before the error propagates") {
  const auto dir = scratch("fail");
  auto c = tiny_config();
  c.train.epochs = 1;  // nothing memorized, so nothing passes calibration
  CHECK_THROWS_AS(cli::run_experiment(c, dir), StateError);
  const auto m = cli::read_manifest(dir / cli::kManifestFile);
  REQUIRE(m.find("unlearn") != nullptr);
  CHECK(m.find("train")->status == cli::StageStatus::complete);
  CHECK(m.find("unlearn")->status == cli::StageStatus::failed);
  CHECK(m.find("unlearn")->message.find("calibration") != std::string::npos);
  CHECK(m.find("steer") == nullptr);
}

TEST_CASE("ablation writes one row per coefficient and layer") {
  const auto& dir = tiny_run();
  const auto c = tiny_config();
  const auto rows = cli::run_ablation(dir);
  CHECK(rows.size() == c.ablate.coefficients.size() * (c.model.n_layers - 1));
  std::ifstream csv(dir / "ablation" / "ablation.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == rows.size() + 1);
  for (const auto& r : rows) {
    // Coefficient zero reproduces the unlearned samples exactly.
    if (r.coefficient == 0.0) CHECK(r.improved == 0);
    CHECK(r.questions > 0);
  }
  CHECK(cli::run_ablation(dir).size() == rows.size());
}
