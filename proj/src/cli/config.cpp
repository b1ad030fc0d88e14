#include "anonact/cli/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "anonact/errors.hpp"
#include "anonact/rng.hpp"

namespace anonact::cli {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ArgumentError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ArgumentError(key + ": expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ArgumentError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ArgumentError(key + ": expected true or false, got '" + v + "'");
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += fmt_double(values[i]);
    else out += std::to_string(values[i]);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define SIZE_FIELD(sec, member)                                                          \
  Field{#sec, #member, [](const ExperimentConfig& c) { return std::to_string(c.sec.member); }, \
        [](ExperimentConfig& c, const std::string& v) { c.sec.member = to_size(#sec "." #member, v); }}
#define DOUBLE_FIELD(sec, member)                                                        \
  Field{#sec, #member, [](const ExperimentConfig& c) { return fmt_double(c.sec.member); }, \
        [](ExperimentConfig& c, const std::string& v) { c.sec.member = to_double(#sec "." #member, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      Field{"experiment", "name", [](const ExperimentConfig& c) { return c.name; },
            [](ExperimentConfig& c, const std::string& v) { c.name = v; }},
      Field{"experiment", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const std::string& v) { c.seed = to_u64("experiment.seed", v); }},
      Field{"corpus", "breadth",
            [](const ExperimentConfig& c) { return corpus::to_string(c.corpus.breadth); },
            [](ExperimentConfig& c, const std::string& v) { c.corpus.breadth = corpus::parse_breadth(v); }},
      SIZE_FIELD(corpus, forget_entities),
      SIZE_FIELD(corpus, retain_entities),
      SIZE_FIELD(corpus, facts_per_entity),
      SIZE_FIELD(corpus, per_slot),
      SIZE_FIELD(corpus, cap),
      Field{"corpus", "system", [](const ExperimentConfig& c) { return c.corpus.system; },
            [](ExperimentConfig& c, const std::string& v) { c.corpus.system = v; }},
      SIZE_FIELD(model, d_model),
      SIZE_FIELD(model, n_layers),
      SIZE_FIELD(model, n_heads),
      SIZE_FIELD(model, context_len),
      SIZE_FIELD(train, epochs),
      SIZE_FIELD(train, batch_size),
      DOUBLE_FIELD(train, learning_rate),
      DOUBLE_FIELD(train, final_lr_fraction),
      DOUBLE_FIELD(train, calibration_caf),
      SIZE_FIELD(train, probe_samples),
      Field{"unlearn", "method",
            [](const ExperimentConfig& c) { return train::to_string(c.unlearn.method); },
            [](ExperimentConfig& c, const std::string& v) { c.unlearn.method = train::parse_unlearn_method(v); }},
      Field{"unlearn", "scope",
            [](const ExperimentConfig& c) { return train::to_string(c.unlearn.scope); },
            [](ExperimentConfig& c, const std::string& v) { c.unlearn.scope = train::parse_forget_scope(v); }},
      DOUBLE_FIELD(unlearn, retain_weight),
      SIZE_FIELD(unlearn, steps),
      DOUBLE_FIELD(unlearn, learning_rate),
      SIZE_FIELD(unlearn, retain_batch),
      SIZE_FIELD(unlearn, probe_every),
      DOUBLE_FIELD(unlearn, caf_target),
      DOUBLE_FIELD(unlearn, max_perplexity_growth),
      DOUBLE_FIELD(unlearn, true_prob_limit),
      Field{"steer", "layers", [](const ExperimentConfig& c) { return join(c.steer.layers); },
            [](ExperimentConfig& c, const std::string& v) { c.steer.layers = parse_size_list(v); }},
      DOUBLE_FIELD(steer, coefficient),
      Field{"steer", "global",
            [](const ExperimentConfig& c) { return std::string(c.steer.global ? "true" : "false"); },
            [](ExperimentConfig& c, const std::string& v) { c.steer.global = to_bool("steer.global", v); }},
      DOUBLE_FIELD(decode, temperature),
      SIZE_FIELD(decode, top_k),
      SIZE_FIELD(decode, samples),
      SIZE_FIELD(decode, max_tokens),
      SIZE_FIELD(decode, top_m),
      Field{"score", "frequency",
            [](const ExperimentConfig& c) { return score::to_string(c.score.frequency); },
            [](ExperimentConfig& c, const std::string& v) { c.score.frequency = score::parse_frequency_mode(v); }},
      Field{"ablate", "coefficients",
            [](const ExperimentConfig& c) { return join(c.ablate.coefficients); },
            [](ExperimentConfig& c, const std::string& v) { c.ablate.coefficients = parse_double_list(v); }},
      Field{"ablate", "layers", [](const ExperimentConfig& c) { return join(c.ablate.layers); },
            [](ExperimentConfig& c, const std::string& v) { c.ablate.layers = parse_size_list(v); }},
  };
  return all;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_size("list", item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double("list", item));
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ArgumentError("experiment name must not be empty");
  model::ModelConfig mc{.vocab_size = 4, .d_model = model.d_model, .n_layers = model.n_layers,
                        .n_heads = model.n_heads, .context_len = model.context_len, .seed = 0};
  mc.validate();
  if (corpus.forget_entities == 0 || corpus.retain_entities == 0 || corpus.facts_per_entity == 0) {
    throw ArgumentError("corpus entity and fact counts must be positive");
  }
  if (corpus.per_slot < 5 || corpus.per_slot > 25) throw ArgumentError("corpus per_slot must lie in [5, 25]");
  if (corpus.cap == 0) throw ArgumentError("corpus cap must be positive");
  if (train.epochs == 0 || train.batch_size == 0) throw ArgumentError("train epochs/batch_size must be positive");
  if (!(train.learning_rate > 0)) throw ArgumentError("train learning_rate must be positive");
  if (train.probe_samples == 0) throw ArgumentError("train probe_samples must be positive");
  if (!(unlearn.learning_rate > 0)) throw ArgumentError("unlearn learning_rate must be positive");
  if (unlearn.probe_every == 0) throw ArgumentError("unlearn probe_every must be positive");
  if (!(decode.temperature > 0)) throw ArgumentError("decode temperature must be positive");
  if (decode.samples == 0 || decode.max_tokens == 0 || decode.top_k == 0 || decode.top_m == 0) {
    throw ArgumentError("decode samples, max_tokens, top_k and top_m must be positive");
  }
  for (std::size_t l : steer_layers()) {
    if (l >= model.n_layers) throw ArgumentError("steer layer " + std::to_string(l) + " out of range");
  }
  for (std::size_t l : ablate_layers()) {
    if (l >= model.n_layers) throw ArgumentError("ablate layer " + std::to_string(l) + " out of range");
  }
  if (ablate.coefficients.empty()) throw ArgumentError("ablate coefficients must not be empty");
}

std::vector<std::size_t> ExperimentConfig::steer_layers() const {
  if (!steer.layers.empty()) return steer.layers;
  return {model.n_layers >= 2 ? model.n_layers - 2 : 0};
}

std::vector<std::size_t> ExperimentConfig::ablate_layers() const {
  if (!ablate.layers.empty()) return ablate.layers;
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l + 1 < model.n_layers; ++l) out.push_back(l);
  return out;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "broad") return c;
  if (name == "narrow") {
    c.corpus.breadth = corpus::Breadth::narrow;
    c.train.epochs = 400;
    return c;
  }
  if (name == "replacement") {
    c.unlearn.method = train::UnlearnMethod::replacement;
    c.unlearn.learning_rate = 1e-3;
    return c;
  }
  throw ArgumentError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"broad", "narrow", "replacement"}; }

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ArgumentError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ArgumentError("config key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : entries) {
      const auto& all = fields();
      auto it = std::find_if(all.begin(), all.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == all.end()) throw ArgumentError("unknown config key " + section + "." + key);
      it->set(base, trim(value.data()));
    }
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_ini(const ExperimentConfig& config, const std::string& section) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (!section.empty() && f.section != section) continue;
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  if (out.empty()) throw ArgumentError("unknown config section '" + section + "'");
  return out;
}

namespace seeds {
std::uint64_t corpus(const ExperimentConfig& c) { return derive_seed(c.seed, 1); }
std::uint64_t anonymize(const ExperimentConfig& c) { return derive_seed(c.seed, 2); }
std::uint64_t model_init(const ExperimentConfig& c) { return derive_seed(c.seed, 3); }
std::uint64_t train(const ExperimentConfig& c) { return derive_seed(c.seed, 4); }
std::uint64_t probe(const ExperimentConfig& c) { return derive_seed(c.seed, 5); }
std::uint64_t unlearn(const ExperimentConfig& c) { return derive_seed(c.seed, 6); }
std::uint64_t decode(const ExperimentConfig& c) { return derive_seed(c.seed, 7); }
}  // namespace seeds

}  // namespace anonact::cli
