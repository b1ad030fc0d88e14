#include "anonact/steer/steer.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "anonact/binary_io.hpp"
#include "anonact/errors.hpp"
#include "anonact/sample/sample.hpp"

namespace anonact::steer {

model::ActivationRecord capture_activation(const model::Model& model,
                                           std::span<const int> prompt_tokens,
                                           const std::set<std::size_t>& layers) {
  if (prompt_tokens.size() >= model.config().context_len) {
    throw CapacityError("capture prompt of " + std::to_string(prompt_tokens.size()) +
                        " tokens does not leave room for an answer token");
  }
  model::TapSpec taps{layers, prompt_tokens.size() - 1};
  return model::forward_with_taps(model, prompt_tokens, taps).record;
}

ItemPrompts item_prompts(const corpus::QAItem& item, const corpus::PromptFormat& format,
                         const corpus::Vocab& vocab) {
  if (item.variants.size() != item.variant_answer_starts.size()) {
    throw ArgumentError("item " + item.id + " has mismatched variant answer starts");
  }
  ItemPrompts prompts;
  prompts.original = sample::encode_prompt(format.prompt(item.question, item.answer_start), vocab);
  for (std::size_t i = 0; i < item.variants.size(); ++i) {
    prompts.variants.push_back(sample::encode_prompt(
        format.prompt(item.variants[i], item.variant_answer_starts[i]), vocab));
  }
  return prompts;
}

SteeringVector mean_difference(const model::ActivationRecord& original,
                               const std::vector<model::ActivationRecord>& variants,
                               std::size_t layer) {
  if (variants.empty()) throw ArgumentError("steering vector needs at least one variant");
  const auto& base = original.layers.at(layer);
  std::vector<double> sum(base.size(), 0.0);
  for (const auto& record : variants) {
    const auto& v = record.layers.at(layer);
    if (v.size() != base.size()) throw ArgumentError("activation width mismatch");
    for (std::size_t e = 0; e < v.size(); ++e) sum[e] += static_cast<double>(v[e]);
  }
  SteeringVector out;
  out.layer = layer;
  out.variant_count = variants.size();
  out.values.resize(base.size());
  const double n = static_cast<double>(variants.size());
  for (std::size_t e = 0; e < base.size(); ++e) {
    out.values[e] = static_cast<float>(static_cast<double>(base[e]) - sum[e] / n);
  }
  return out;
}

std::map<std::size_t, SteeringVector> local_steering_vectors(const model::Model& model,
                                                             const corpus::QAItem& item,
                                                             const std::set<std::size_t>& layers,
                                                             const corpus::PromptFormat& format,
                                                             const corpus::Vocab& vocab) {
  if (item.variants.empty()) {
    throw ArgumentError("item " + item.id + " has no anonymized variants");
  }
  const ItemPrompts prompts = item_prompts(item, format, vocab);
  const auto original = capture_activation(model, prompts.original, layers);
  std::vector<model::ActivationRecord> variants;
  variants.reserve(prompts.variants.size());
  for (const auto& p : prompts.variants) variants.push_back(capture_activation(model, p, layers));
  std::map<std::size_t, SteeringVector> out;
  for (std::size_t layer : layers) {
    SteeringVector v = mean_difference(original, variants, layer);
    v.question_id = item.id;
    out.emplace(layer, std::move(v));
  }
  return out;
}

SteeringVector local_steering_vector(const model::Model& model, const corpus::QAItem& item,
                                     std::size_t layer, const corpus::PromptFormat& format,
                                     const corpus::Vocab& vocab) {
  return local_steering_vectors(model, item, {layer}, format, vocab).at(layer);
}

SteeringVector global_steering_vector(const std::vector<SteeringVector>& locals) {
  if (locals.empty()) throw ArgumentError("global steering vector needs at least one input");
  const std::size_t layer = locals.front().layer;
  const std::size_t width = locals.front().values.size();
  std::vector<double> sum(width, 0.0);
  std::size_t variants = 0;
  for (const auto& v : locals) {
    if (v.layer != layer) throw ArgumentError("global steering vector over mixed layers");
    if (v.values.size() != width) throw ArgumentError("steering vector width mismatch");
    for (std::size_t e = 0; e < width; ++e) sum[e] += static_cast<double>(v.values[e]);
    variants += v.variant_count;
  }
  SteeringVector out;
  out.layer = layer;
  out.global = true;
  out.variant_count = variants;
  out.values.resize(width);
  const double n = static_cast<double>(locals.size());
  for (std::size_t e = 0; e < width; ++e) out.values[e] = static_cast<float>(sum[e] / n);
  return out;
}

model::InjectionPlan make_plan(const std::vector<SteeringVector>& vectors, double coefficient) {
  model::InjectionPlan plan;
  plan.coefficient = coefficient;
  plan.active_step = 0;
  for (const auto& v : vectors) {
    if (!plan.vectors.emplace(v.layer, v.values).second) {
      throw ArgumentError("two steering vectors for layer " + std::to_string(v.layer));
    }
  }
  return plan;
}

std::size_t default_layer(const model::ModelConfig& config) {
  return config.n_layers >= 2 ? config.n_layers - 2 : 0;
}

namespace {
constexpr std::array<char, 8> kMagic = {'A', 'N', 'O', 'N', 'A', 'C', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_vectors(const std::filesystem::path& path, const std::vector<SteeringVector>& vectors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write steering vectors " + path.string());
  out.write(kMagic.data(), kMagic.size());
  binary::write_le<std::uint32_t>(out, kVersion);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(vectors.size()));
  for (const auto& v : vectors) {
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.layer));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.variant_count));
    binary::write_le<std::uint8_t>(out, v.global ? 1 : 0);
    binary::write_string(out, v.question_id);
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.values.size()));
    binary::write_floats(out, v.values);
  }
}

std::vector<SteeringVector> read_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read steering vectors " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a steering vector file: " + path.string());
  }
  if (binary::read_le<std::uint32_t>(in, "version") != kVersion) {
    throw FormatError("unsupported steering vector version");
  }
  const auto count = binary::read_le<std::uint32_t>(in, "vector count");
  std::vector<SteeringVector> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    SteeringVector v;
    v.layer = binary::read_le<std::uint32_t>(in, "layer");
    v.variant_count = binary::read_le<std::uint32_t>(in, "variant count");
    v.global = binary::read_le<std::uint8_t>(in, "provenance") != 0;
    v.question_id = binary::read_string(in, 4096, "question id");
    const auto len = binary::read_le<std::uint32_t>(in, "length");
    if (len > (1u << 24)) throw FormatError("implausible steering vector length");
    v.values = binary::read_floats(in, len, "values");
    for (float x : v.values) {
      if (!std::isfinite(x)) throw FormatError("non-finite steering vector entry");
    }
    out.push_back(std::move(v));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes");
  return out;
}

}  // namespace anonact::steer
