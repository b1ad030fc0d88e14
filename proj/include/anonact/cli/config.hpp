#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anonact/corpus/universe.hpp"
#include "anonact/model/transformer.hpp"
#include "anonact/score/score.hpp"
#include "anonact/train/train.hpp"

namespace anonact::cli {

struct CorpusSection {
  corpus::Breadth breadth = corpus::Breadth::broad;
  std::size_t forget_entities = 6;
  std::size_t retain_entities = 6;
  std::size_t facts_per_entity = 5;
  std::size_t per_slot = 5;
  std::size_t cap = 16;
  std::string system;
};

struct ModelSection {
  std::size_t d_model = 64;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t context_len = 48;
};

struct TrainSection {
  std::size_t epochs = 150;
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.1;
  double calibration_caf = 0.8;
  std::size_t probe_samples = 100;
};

struct UnlearnSection {
  train::UnlearnMethod method = train::UnlearnMethod::gradient_ascent;
  train::ForgetScope scope = train::ForgetScope::answer;
  double retain_weight = 1.0;
  std::size_t steps = 300;
  double learning_rate = 1e-3;
  std::size_t retain_batch = 8;
  std::size_t probe_every = 1;
  double caf_target = 0.2;
  double max_perplexity_growth = 0.2;
  double true_prob_limit = 0.05;
};

struct SteerSection {
  std::vector<std::size_t> layers;  // post-block indices; empty selects n_layers - 2
  double coefficient = 2.0;
  bool global = false;
};

struct DecodeSection {
  double temperature = 2.0;
  std::size_t top_k = 40;
  std::size_t samples = 200;
  std::size_t max_tokens = 10;
  std::size_t top_m = 40;  // next-token distribution size
};

struct ScoreSection {
  score::FrequencyMode frequency = score::FrequencyMode::per_question;
};

struct AblateSection {
  std::vector<double> coefficients = {0.0, 1.0, 2.0, 4.0};
  std::vector<std::size_t> layers;  // empty: every boundary 0 .. n_layers - 2
};

struct ExperimentConfig {
  std::string name = "broad";
  std::uint64_t seed = 1;
  CorpusSection corpus;
  ModelSection model;
  TrainSection train;
  UnlearnSection unlearn;
  SteerSection steer;
  DecodeSection decode;
  ScoreSection score;
  AblateSection ablate;

  void validate() const;
  std::vector<std::size_t> steer_layers() const;
  std::vector<std::size_t> ablate_layers() const;
};

// Built-in experiment presets: broad, narrow, replacement.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Sectioned key = value text. Unknown sections or keys are rejected.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base);

// Canonical text of one section (fixed key order and number formatting),
// or of the whole config when section is empty.
std::string to_ini(const ExperimentConfig& config, const std::string& section = {});

std::vector<std::size_t> parse_size_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// Stage seeds derived from the master seed.
namespace seeds {
std::uint64_t corpus(const ExperimentConfig& c);
std::uint64_t anonymize(const ExperimentConfig& c);
std::uint64_t model_init(const ExperimentConfig& c);
std::uint64_t train(const ExperimentConfig& c);
std::uint64_t probe(const ExperimentConfig& c);
std::uint64_t unlearn(const ExperimentConfig& c);
std::uint64_t decode(const ExperimentConfig& c);
}  // namespace seeds

}  // namespace anonact::cli
