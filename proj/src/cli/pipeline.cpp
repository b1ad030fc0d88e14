#include "anonact/cli/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "anonact/corpus/qa.hpp"
#include "anonact/corpus/wordlists.hpp"
#include "anonact/errors.hpp"
#include "anonact/model/checkpoint.hpp"
#include "anonact/rng.hpp"
#include "anonact/sample/sample.hpp"
#include "anonact/steer/steer.hpp"
#include "anonact/train/train.hpp"
#include "json.hpp"

namespace anonact::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Context {
  const ExperimentConfig& cfg;
  fs::path dir;
  LogFn log;

  fs::path at(const std::string& rel) const { return dir / rel; }
  void say(const std::string& s) const {
    if (log) log(s);
  }
  corpus::PromptFormat format() const { return corpus::PromptFormat{.system = cfg.corpus.system}; }
};

struct StageDef {
  std::string name;
  std::vector<std::string> sections;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::function<void(const Context&)> body;
};

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StateError("cannot write " + path.string());
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ordered_json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StateError("cannot read " + path.string());
  std::vector<ordered_json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_vocab(const fs::path& path, const corpus::Vocab& vocab) {
  auto out = open_out(path);
  for (const auto& w : vocab.words()) out << w << '\n';
}

corpus::Vocab read_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StateError("cannot read " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) words.push_back(line);
  return corpus::Vocab::from_words(std::move(words));
}

train::ProbeConfig probe_config(const ExperimentConfig& cfg) {
  train::ProbeConfig p;
  p.samples = cfg.train.probe_samples;
  p.seed = seeds::probe(cfg);
  return p;
}

// Forget items that passed calibration, in dataset order.
std::vector<corpus::QAItem> eval_items(const Context& ctx) {
  std::set<std::string> passed;
  for (const auto& j : read_jsonl(ctx.at("calibration.jsonl"))) {
    if (j.at("passed").get<bool>()) passed.insert(j.at("id").get<std::string>());
  }
  std::vector<corpus::QAItem> out;
  for (auto& item : corpus::read_dataset(ctx.at("qa.jsonl"))) {
    if (item.forget && passed.count(item.id)) out.push_back(std::move(item));
  }
  if (out.empty()) throw StateError("no forget question passed calibration");
  return out;
}

sample::DecodeConfig decode_config(const ExperimentConfig& cfg, const corpus::Vocab& vocab,
                                   const std::string& question_id) {
  sample::DecodeConfig d;
  d.temperature = cfg.decode.temperature;
  d.top_k = cfg.decode.top_k;
  d.samples = cfg.decode.samples;
  d.max_tokens = cfg.decode.max_tokens;
  d.stop_tokens = sample::default_stop_tokens(vocab);
  // Same seed for every condition of a question, so conditions differ only by the model.
  d.seed = text_seed(seeds::decode(cfg), question_id);
  return d;
}

// Local vectors per (question, layer), or one global vector per layer.
std::vector<steer::SteeringVector> build_vectors(const model::Model& model,
                                                 const std::vector<corpus::QAItem>& items,
                                                 const std::vector<std::size_t>& layers, bool global,
                                                 const corpus::PromptFormat& format,
                                                 const corpus::Vocab& vocab) {
  const std::set<std::size_t> layer_set(layers.begin(), layers.end());
  std::map<std::size_t, std::vector<steer::SteeringVector>> by_layer;
  for (const auto& item : items) {
    for (auto& [layer, v] : steer::local_steering_vectors(model, item, layer_set, format, vocab)) {
      by_layer[layer].push_back(std::move(v));
    }
  }
  std::vector<steer::SteeringVector> out;
  if (global) {
    for (const auto& [layer, locals] : by_layer) out.push_back(steer::global_steering_vector(locals));
    return out;
  }
  for (const auto& item : items) {
    for (const auto& [layer, locals] : by_layer) {
      for (const auto& v : locals) {
        if (v.question_id == item.id) out.push_back(v);
      }
    }
  }
  return out;
}

model::InjectionPlan plan_for(const std::vector<steer::SteeringVector>& vectors,
                              const std::string& question_id, double coefficient) {
  std::vector<steer::SteeringVector> chosen;
  for (const auto& v : vectors) {
    if (v.global || v.question_id == question_id) chosen.push_back(v);
  }
  if (chosen.empty()) throw StateError("no steering vector for " + question_id);
  return steer::make_plan(chosen, coefficient);
}

// --- stages ---------------------------------------------------------------

void gen_corpus(const Context& ctx) {
  const auto& c = ctx.cfg;
  corpus::UniverseSpec spec;
  spec.breadth = c.corpus.breadth;
  spec.forget_entities = c.corpus.forget_entities;
  spec.retain_entities = c.corpus.retain_entities;
  spec.facts_per_entity = c.corpus.facts_per_entity;
  spec.seed = seeds::corpus(c);
  const auto universe = corpus::generate_universe(spec, ctx.format());
  corpus::validate_universe(universe);
  const auto vocab = corpus::Vocab::build(universe.documents);

  corpus::AnonymizeOptions ao;
  ao.per_slot = c.corpus.per_slot;
  ao.cap = c.corpus.cap;
  ao.seed = seeds::anonymize(c);
  auto items = corpus::build_qa(universe);
  for (auto& item : items) item = corpus::anonymize_question(item, corpus::wordlists::replacement_pools(), ao);

  // Retain documents never name a forget entity.
  std::vector<std::string> forget_names;
  for (const auto& e : universe.entities) {
    if (e.forget) forget_names.push_back(e.name);
  }
  std::vector<std::string> retain;
  for (const auto& d : universe.documents) {
    if (std::none_of(forget_names.begin(), forget_names.end(),
                     [&](const std::string& n) { return corpus::contains_phrase(d, n); })) {
      retain.push_back(d);
    }
  }
  if (retain.empty()) throw StateError("retain corpus is empty");

  corpus::write_corpus(ctx.at("corpus.txt"), universe.documents);
  corpus::write_corpus(ctx.at("retain.txt"), retain);
  corpus::write_dataset(ctx.at("qa.jsonl"), items);
  write_vocab(ctx.at("vocab.txt"), vocab);
  ctx.say(std::to_string(universe.documents.size()) + " documents, " + std::to_string(items.size()) +
          " questions, vocabulary " + std::to_string(vocab.size()));
}

void train_stage(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto documents = corpus::read_corpus(ctx.at("corpus.txt"));
  const auto vocab = read_vocab(ctx.at("vocab.txt"));
  const auto items = corpus::read_dataset(ctx.at("qa.jsonl"));

  model::ModelConfig mc{.vocab_size = vocab.size(), .d_model = c.model.d_model,
                        .n_layers = c.model.n_layers, .n_heads = c.model.n_heads,
                        .context_len = c.model.context_len, .seed = seeds::model_init(c)};
  train::TrainConfig tc;
  tc.epochs = c.train.epochs;
  tc.batch_size = c.train.batch_size;
  tc.learning_rate = c.train.learning_rate;
  tc.final_lr_fraction = c.train.final_lr_fraction;
  tc.seed = seeds::train(c);
  const auto result = train::train_base(mc, documents, vocab, tc, ctx.log);
  model::save_checkpoint(result.model, ctx.at("base.ckpt"));
  {
    auto out = open_out(ctx.at("train_log.csv"));
    out << "epoch,loss\n";
    for (const auto& [epoch, loss] : result.loss_log) out << epoch << ',' << score::format_number(loss) << '\n';
  }

  const auto records =
      train::calibrate(result.model, items, ctx.format(), vocab, probe_config(c), c.train.calibration_caf);
  auto out = open_out(ctx.at("calibration.jsonl"));
  std::size_t forget_passed = 0, forget_total = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ordered_json j{{"id", r.id},           {"forget", items[i].forget}, {"greedy_correct", r.greedy_correct},
                   {"caf", r.caf},         {"passed", r.passed}};
    out << j.dump() << '\n';
    forget_total += items[i].forget;
    forget_passed += items[i].forget && r.passed;
  }
  ctx.say("calibration: " + std::to_string(forget_passed) + " of " + std::to_string(forget_total) +
          " forget questions pass");
}

void unlearn_stage(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto base = model::load_checkpoint(ctx.at("base.ckpt"));
  const auto vocab = read_vocab(ctx.at("vocab.txt"));
  const auto items = corpus::read_dataset(ctx.at("qa.jsonl"));
  const auto retain = corpus::read_corpus(ctx.at("retain.txt"));
  const auto forget = eval_items(ctx);

  train::UnlearnConfig uc;
  uc.method = c.unlearn.method;
  for (const auto& item : forget) uc.forget_ids.push_back(item.id);
  uc.retain_weight = c.unlearn.retain_weight;
  uc.steps = c.unlearn.steps;
  uc.learning_rate = c.unlearn.learning_rate;
  uc.seed = seeds::unlearn(c);
  uc.retain_batch = c.unlearn.retain_batch;
  uc.probe_every = c.unlearn.probe_every;
  uc.scope = c.unlearn.scope;
  uc.caf_target = c.unlearn.caf_target;
  uc.max_perplexity_growth = c.unlearn.max_perplexity_growth;
  uc.true_prob_limit = c.unlearn.true_prob_limit;
  uc.probe = probe_config(c);

  const bool replacement = uc.method == train::UnlearnMethod::replacement;
  if (replacement) uc.substitution = train::make_substitution_map(items, uc.forget_ids, seeds::unlearn(c));
  const auto result = replacement ? train::unlearn_replacement(base, items, retain, ctx.format(), vocab, uc)
                                  : train::unlearn_gradient_ascent(base, items, retain, ctx.format(), vocab, uc);
  model::save_checkpoint(result.model, ctx.at("unlearned.ckpt"));

  // Retained knowledge: probe CAF on calibrated non-forget questions.
  std::set<std::string> passed;
  for (const auto& j : read_jsonl(ctx.at("calibration.jsonl"))) {
    if (j.at("passed").get<bool>()) passed.insert(j.at("id").get<std::string>());
  }
  double retain_caf = 0.0;
  std::size_t retain_n = 0;
  for (const auto& item : items) {
    if (item.forget || !passed.count(item.id)) continue;
    retain_caf += train::probe_caf(result.model, item, ctx.format(), vocab, uc.probe);
    ++retain_n;
  }

  ordered_json j;
  j["method"] = train::to_string(uc.method);
  j["scope"] = train::to_string(uc.scope);
  j["status"] = train::to_string(result.status);
  j["message"] = result.message;
  j["steps_run"] = result.steps_run;
  j["target_reached"] = result.target_reached;
  j["forget_caf"] = result.forget_caf;
  j["retain_caf"] = retain_n ? retain_caf / static_cast<double>(retain_n) : 0.0;
  j["retain_perplexity_before"] = result.retain_perplexity_before;
  j["retain_perplexity_after"] = result.retain_perplexity_after;
  j["forget_ids"] = uc.forget_ids;
  j["substitution"] = ordered_json::object();
  for (const auto& [t, f] : uc.substitution) j["substitution"][t] = f;
  open_out(ctx.at("unlearn.json")) << j.dump(2) << '\n';
  ctx.say("unlearning " + train::to_string(result.status) + " after " + std::to_string(result.steps_run) +
          " steps, forget CAF " + score::format_number(result.forget_caf) +
          (result.message.empty() ? "" : " (" + result.message + ")"));
}

void steer_stage(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto model = model::load_checkpoint(ctx.at("unlearned.ckpt"));
  const auto vocab = read_vocab(ctx.at("vocab.txt"));
  const auto items = eval_items(ctx);
  const auto vectors = build_vectors(model, items, c.steer_layers(), c.steer.global, ctx.format(), vocab);
  steer::write_vectors(ctx.at("vectors.bin"), vectors);
  ctx.say(std::to_string(vectors.size()) + " steering vectors");
}

ordered_json distribution_json(const model::Model& model, const std::vector<int>& prompt,
                               const model::InjectionPlan* plan, const corpus::QAItem& item,
                               const std::string& false_keyword, const ExperimentConfig& cfg,
                               const corpus::PromptFormat& format, const corpus::Vocab& vocab) {
  ordered_json j;
  j["entropy"] = sample::next_token_entropy(model, prompt, plan);
  j["keyword_probability"] =
      train::keyword_probability(model, item, item.answer_keywords.front(), format, vocab, plan);
  if (!false_keyword.empty()) {
    j["false_keyword_probability"] = train::keyword_probability(model, item, false_keyword, format, vocab, plan);
  }
  j["top"] = ordered_json::array();
  for (const auto& tp : sample::next_token_distribution(model, prompt, plan, cfg.decode.top_m)) {
    j["top"].push_back({vocab.word(tp.token), tp.probability});
  }
  return j;
}

void sample_stage(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto base = model::load_checkpoint(ctx.at("base.ckpt"));
  const auto unlearned = model::load_checkpoint(ctx.at("unlearned.ckpt"));
  const auto vocab = read_vocab(ctx.at("vocab.txt"));
  const auto vectors = steer::read_vectors(ctx.at("vectors.bin"));
  const auto items = eval_items(ctx);
  const auto unlearn_info = ordered_json::parse(read_text(ctx.at("unlearn.json")));
  const auto& substitution = unlearn_info.at("substitution");
  const auto format = ctx.format();

  std::vector<sample::SampleSet> sets;
  auto dist = open_out(ctx.at("distributions.jsonl"));
  for (const auto& item : items) {
    const auto prompt = sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
    const auto plan = plan_for(vectors, item.id, c.steer.coefficient);
    const auto dc = decode_config(c, vocab, item.id);
    sets.push_back(sample::sample_answers(base, prompt, nullptr, dc, vocab, item.id, sample::Condition::base));
    sets.push_back(
        sample::sample_answers(unlearned, prompt, nullptr, dc, vocab, item.id, sample::Condition::unlearned));
    sets.push_back(
        sample::sample_answers(unlearned, prompt, &plan, dc, vocab, item.id, sample::Condition::steered));

    const auto& keyword = item.answer_keywords.front();
    const std::string false_keyword =
        substitution.contains(keyword) ? substitution.at(keyword).get<std::string>() : std::string();
    ordered_json j;
    j["id"] = item.id;
    j["keyword"] = keyword;
    if (!false_keyword.empty()) j["false_keyword"] = false_keyword;
    j["unsteered"] = distribution_json(unlearned, prompt, nullptr, item, false_keyword, c, format, vocab);
    j["steered"] = distribution_json(unlearned, prompt, &plan, item, false_keyword, c, format, vocab);
    dist << j.dump() << '\n';
  }
  sample::write_samples(ctx.at("samples.jsonl"), sets);
  ctx.say(std::to_string(items.size()) + " questions x 3 conditions x " + std::to_string(c.decode.samples) +
          " samples");
}

void score_stage(const Context& ctx) {
  const auto report = load_report(ctx.dir);
  score::write_csv(report, ctx.at("report"));
}

void report_stage(const Context& ctx) { emit_report(ctx.dir); }

const std::vector<StageDef>& stages() {
  static const std::vector<StageDef> defs = {
      {"gen-corpus", {"corpus"}, {}, {"corpus.txt", "retain.txt", "qa.jsonl", "vocab.txt"}, gen_corpus},
      {"train",
       {"corpus", "model", "train"},
       {"corpus.txt", "qa.jsonl", "vocab.txt"},
       {"base.ckpt", "train_log.csv", "calibration.jsonl"},
       train_stage},
      {"unlearn",
       {"corpus", "train", "unlearn"},
       {"base.ckpt", "calibration.jsonl", "qa.jsonl", "retain.txt", "vocab.txt"},
       {"unlearned.ckpt", "unlearn.json"},
       unlearn_stage},
      {"steer",
       {"corpus", "steer"},
       {"unlearned.ckpt", "calibration.jsonl", "qa.jsonl", "vocab.txt"},
       {"vectors.bin"},
       steer_stage},
      {"sample",
       {"corpus", "steer", "decode"},
       {"base.ckpt", "unlearned.ckpt", "vectors.bin", "calibration.jsonl", "qa.jsonl", "vocab.txt", "unlearn.json"},
       {"samples.jsonl", "distributions.jsonl"},
       sample_stage},
      {"score",
       {"score"},
       {"samples.jsonl", "qa.jsonl"},
       {"report/caf.csv", "report/roc.csv", "report/auc.csv", "report/deltas.csv"},
       score_stage},
      {"report",
       {"experiment", "score"},
       {"samples.jsonl", "qa.jsonl", "distributions.jsonl", "report/auc.csv"},
       {"report/caf_deltas.svg", "report/roc.svg", "report/summary.txt"},
       report_stage},
  };
  return defs;
}

std::vector<Artifact> hash_artifacts(const fs::path& dir, const std::vector<std::string>& paths) {
  std::vector<Artifact> out;
  for (const auto& p : paths) out.push_back({p, sha256_file(dir / p)});
  return out;
}

bool outputs_intact(const fs::path& dir, const StageRecord& rec) {
  for (const auto& a : rec.outputs) {
    const auto p = dir / a.path;
    if (!fs::exists(p) || sha256_file(p) != a.sha256) return false;
  }
  return true;
}

// Runs one stage unless its record is current. Returns true when it ran.
bool run_stage(const StageDef& def, const Context& ctx, RunManifest& manifest) {
  for (const auto& in : def.inputs) {
    if (!fs::exists(ctx.at(in))) {
      throw StateError("stage " + def.name + " needs " + in + "; run the earlier stages first");
    }
  }
  const auto inputs = hash_artifacts(ctx.dir, def.inputs);
  // The experiment name is a label; only the seed enters the hash.
  std::string key = "seed " + std::to_string(ctx.cfg.seed) + '\n';
  for (const auto& s : def.sections) key += to_ini(ctx.cfg, s);
  for (const auto& a : inputs) key += a.path + ' ' + a.sha256 + '\n';
  const auto hash = sha256_hex(key);

  if (const auto* rec = manifest.find(def.name);
      rec && rec->status == StageStatus::complete && rec->config_hash == hash && outputs_intact(ctx.dir, *rec)) {
    ctx.say(def.name + ": unchanged, skipped");
    return false;
  }

  StageRecord rec;
  rec.name = def.name;
  rec.config_hash = hash;
  rec.inputs = inputs;
  rec.started = utc_timestamp();
  ctx.say(def.name + ": running");
  try {
    def.body(ctx);
    rec.outputs = hash_artifacts(ctx.dir, def.outputs);
    rec.status = StageStatus::complete;
  } catch (const std::exception& e) {
    rec.status = StageStatus::failed;
    rec.message = e.what();
    rec.finished = utc_timestamp();
    manifest.put(std::move(rec));
    write_manifest(ctx.at(kManifestFile), manifest);
    throw;
  }
  rec.finished = utc_timestamp();
  manifest.put(std::move(rec));
  write_manifest(ctx.at(kManifestFile), manifest);
  return true;
}

RunManifest open_manifest(const ExperimentConfig& cfg, const fs::path& dir) {
  RunManifest m;
  if (fs::exists(dir / kManifestFile)) m = read_manifest(dir / kManifestFile);
  m.experiment = cfg.name;
  m.seed = cfg.seed;
  m.seeds = {{"corpus", seeds::corpus(cfg)},   {"anonymize", seeds::anonymize(cfg)},
             {"model_init", seeds::model_init(cfg)}, {"train", seeds::train(cfg)},
             {"probe", seeds::probe(cfg)},     {"unlearn", seeds::unlearn(cfg)},
             {"decode", seeds::decode(cfg)}};
  m.config_path = kConfigFile;
  return m;
}

void write_config(const ExperimentConfig& cfg, const fs::path& dir) {
  const auto text = to_ini(cfg);
  const auto path = dir / kConfigFile;
  if (fs::exists(path) && read_text(path) == text) return;
  open_out(path) << text;
}

ExperimentConfig run_config(const fs::path& run_dir) {
  const auto path = run_dir / kConfigFile;
  if (!fs::exists(path)) throw StateError("no " + std::string(kConfigFile) + " in " + run_dir.string());
  auto cfg = load_config(path, ExperimentConfig{});
  cfg.validate();
  return cfg;
}

void require_complete(const fs::path& run_dir, const std::string& stage) {
  const auto path = run_dir / kManifestFile;
  if (!fs::exists(path)) throw StateError("no manifest in " + run_dir.string());
  const auto m = read_manifest(path);
  const auto* rec = m.find(stage);
  if (!rec || rec->status != StageStatus::complete || !outputs_intact(run_dir, *rec)) {
    throw StateError("stage " + stage + " has not completed in " + run_dir.string());
  }
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : stages()) out.push_back(s.name);
    return out;
  }();
  return names;
}

RunManifest run_experiment(const ExperimentConfig& config, const fs::path& out_dir, const RunOptions& options) {
  config.validate();
  const auto& names = stage_names();
  if (!options.until.empty() && std::find(names.begin(), names.end(), options.until) == names.end()) {
    throw ArgumentError("unknown stage '" + options.until + "'");
  }
  fs::create_directories(out_dir);
  write_config(config, out_dir);
  auto manifest = open_manifest(config, out_dir);
  write_manifest(out_dir / kManifestFile, manifest);
  const Context ctx{config, out_dir, options.log};
  for (const auto& def : stages()) {
    run_stage(def, ctx, manifest);
    if (def.name == options.until) break;
  }
  return manifest;
}

RunManifest run_experiment(const fs::path& config_path, const fs::path& out_dir, const RunOptions& options) {
  return run_experiment(load_config(config_path, ExperimentConfig{}), out_dir, options);
}

score::ExperimentReport load_report(const fs::path& run_dir) {
  const auto cfg = run_config(run_dir);
  std::map<std::string, std::vector<std::string>> keywords;
  for (const auto& item : corpus::read_dataset(run_dir / "qa.jsonl")) keywords[item.id] = item.answer_keywords;
  std::map<sample::Condition, std::vector<sample::SampleSet>> runs;
  for (auto& set : sample::read_samples(run_dir / "samples.jsonl")) {
    if (!keywords.count(set.question_id)) throw StateError("samples reference unknown question " + set.question_id);
    runs[set.condition].push_back(std::move(set));
  }
  if (runs.empty()) throw StateError("no samples in " + run_dir.string());
  std::map<std::string, std::vector<std::string>> used;
  for (const auto& set : runs.begin()->second) used[set.question_id] = keywords.at(set.question_id);
  score::CompareOptions opts;
  opts.mode = cfg.score.frequency;
  return score::compare_runs(runs, used, opts);
}

Summary summarize(const fs::path& run_dir) {
  const auto cfg = run_config(run_dir);
  const auto report = load_report(run_dir);
  Summary s;
  s.experiment = cfg.name;
  s.conditions = report.conditions();
  for (auto c : s.conditions) {
    const auto it = report.curves.find(c);
    s.auc[c] = it == report.curves.end() ? "na" : score::format_number(it->second.auc);
    s.median_caf[c] = report.median_caf(c);
  }
  std::map<std::string, std::map<sample::Condition, double>> per_question;
  for (const auto& row : report.cafs) per_question[row.question_id][row.condition] = row.caf;
  s.questions = per_question.size();
  for (const auto& [id, cafs] : per_question) {
    const auto u = cafs.find(sample::Condition::unlearned);
    const auto st = cafs.find(sample::Condition::steered);
    if (u != cafs.end() && st != cafs.end() && st->second > u->second) ++s.steered_above_unlearned;
  }
  if (s.median_caf.count(sample::Condition::unlearned) && s.median_caf.count(sample::Condition::steered)) {
    s.no_improvement = s.median_caf[sample::Condition::steered] <= s.median_caf[sample::Condition::unlearned];
  }
  s.replacement = cfg.unlearn.method == train::UnlearnMethod::replacement;
  if (s.replacement) {
    for (const auto& j : read_jsonl(run_dir / "distributions.jsonl")) {
      if (!j.contains("false_keyword")) continue;
      const auto& u = j.at("unsteered");
      const auto& st = j.at("steered");
      s.false_keyword_down +=
          st.at("false_keyword_probability").get<double>() < u.at("false_keyword_probability").get<double>();
      s.entropy_up += st.at("entropy").get<double>() > u.at("entropy").get<double>();
    }
  }
  return s;
}

std::string format_summary(const Summary& s) {
  std::ostringstream out;
  out << "experiment " << s.experiment << '\n';
  out << "questions " << s.questions << '\n';
  out << "condition,auc,median_caf\n";
  for (auto c : s.conditions) {
    out << sample::to_string(c) << ',' << s.auc.at(c) << ',' << score::format_number(s.median_caf.at(c)) << '\n';
  }
  out << "steered_above_unlearned " << s.steered_above_unlearned << " of " << s.questions << '\n';
  if (s.replacement) {
    out << "false_keyword_probability_down " << s.false_keyword_down << " of " << s.questions << '\n';
    out << "entropy_up " << s.entropy_up << " of " << s.questions << '\n';
  }
  out << "verdict " << (s.no_improvement ? "no improvement" : "improvement") << '\n';
  return out.str();
}

void emit_report(const fs::path& run_dir) {
  require_complete(run_dir, "score");
  const auto report = load_report(run_dir);
  const auto dir = run_dir / "report";
  score::write_csv(report, dir);
  score::write_svg(report, dir);
  open_out(dir / "summary.txt") << format_summary(summarize(run_dir));
}

std::vector<AblationRow> run_ablation(const fs::path& run_dir, const RunOptions& options) {
  const auto cfg = run_config(run_dir);
  require_complete(run_dir, "unlearn");
  auto manifest = read_manifest(run_dir / kManifestFile);
  std::vector<AblationRow> rows;

  const StageDef def{
      "ablate",
      {"corpus", "steer", "decode", "ablate"},
      {"unlearned.ckpt", "calibration.jsonl", "qa.jsonl", "vocab.txt"},
      {"ablation/ablation.csv"},
      [&](const Context& ctx) {
        const auto model = model::load_checkpoint(ctx.at("unlearned.ckpt"));
        const auto vocab = read_vocab(ctx.at("vocab.txt"));
        const auto items = eval_items(ctx);
        const auto format = ctx.format();
        std::vector<std::vector<int>> prompts;
        std::vector<double> baseline;
        for (const auto& item : items) {
          prompts.push_back(sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab));
          baseline.push_back(score::caf(sample::sample_answers(model, prompts.back(), nullptr,
                                                               decode_config(cfg, vocab, item.id), vocab),
                                        item.answer_keywords));
        }
        for (std::size_t layer : cfg.ablate_layers()) {
          const auto vectors = build_vectors(model, items, {layer}, cfg.steer.global, format, vocab);
          for (double coef : cfg.ablate.coefficients) {
            AblationRow row{.coefficient = coef, .layer = layer, .questions = items.size()};
            std::vector<double> cafs;
            for (std::size_t i = 0; i < items.size(); ++i) {
              const auto plan = plan_for(vectors, items[i].id, coef);
              const auto set = sample::sample_answers(model, prompts[i], &plan,
                                                      decode_config(cfg, vocab, items[i].id), vocab);
              cafs.push_back(score::caf(set, items[i].answer_keywords));
              row.improved += cafs.back() > baseline[i];
            }
            row.mean_caf = std::accumulate(cafs.begin(), cafs.end(), 0.0) / static_cast<double>(cafs.size());
            row.median_caf = score::median(cafs);
            rows.push_back(row);
            ctx.say("ablate coefficient " + score::format_number(coef) + " layer " + std::to_string(layer) +
                    ": median CAF " + score::format_number(row.median_caf));
          }
        }
        std::sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
          return a.coefficient != b.coefficient ? a.coefficient < b.coefficient : a.layer < b.layer;
        });
        auto out = open_out(ctx.at("ablation/ablation.csv"));
        out << "coefficient,layer,median_caf,mean_caf,improved,questions\n";
        for (const auto& r : rows) {
          out << score::format_number(r.coefficient) << ',' << r.layer << ',' << score::format_number(r.median_caf)
              << ',' << score::format_number(r.mean_caf) << ',' << r.improved << ',' << r.questions << '\n';
        }
      }};
  const Context ctx{cfg, run_dir, options.log};
  if (!run_stage(def, ctx, manifest)) {
    // Unchanged: read the rows back.
    std::ifstream in(run_dir / "ablation/ablation.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string f[6];
      for (auto& x : f) std::getline(ss, x, ',');
      rows.push_back({std::stod(f[0]), std::stoul(f[1]), std::stod(f[2]), std::stod(f[3]), std::stoul(f[4]),
                      std::stoul(f[5])});
    }
  }
  return rows;
}

}  // namespace anonact::cli
