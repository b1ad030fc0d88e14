#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "anonact/corpus/qa.hpp"
#include "anonact/corpus/universe.hpp"
#include "anonact/corpus/vocab.hpp"
#include "anonact/model/transformer.hpp"

namespace anonact::steer {

struct SteeringVector {
  std::size_t layer = 0;
  std::vector<float> values;
  bool global = false;
  std::string question_id;  // empty for global vectors
  std::size_t variant_count = 0;

  bool operator==(const SteeringVector&) const = default;
};

// Residuals at the final prompt position after each requested block.
model::ActivationRecord capture_activation(const model::Model& model,
                                           std::span<const int> prompt_tokens,
                                           const std::set<std::size_t>& layers);

// Builds the original and variant prompts of an item.
struct ItemPrompts {
  std::vector<int> original;
  std::vector<std::vector<int>> variants;
};
ItemPrompts item_prompts(const corpus::QAItem& item, const corpus::PromptFormat& format,
                         const corpus::Vocab& vocab);

// Mean-difference direction: activation of the original prompt minus the mean
// activation over the anonymized variants, one vector per layer. Sums run in
// double, variants in list order.
std::map<std::size_t, SteeringVector> local_steering_vectors(const model::Model& model,
                                                             const corpus::QAItem& item,
                                                             const std::set<std::size_t>& layers,
                                                             const corpus::PromptFormat& format,
                                                             const corpus::Vocab& vocab);

SteeringVector local_steering_vector(const model::Model& model, const corpus::QAItem& item,
                                     std::size_t layer, const corpus::PromptFormat& format,
                                     const corpus::Vocab& vocab);

// Same arithmetic on already-captured records.
SteeringVector mean_difference(const model::ActivationRecord& original,
                               const std::vector<model::ActivationRecord>& variants,
                               std::size_t layer);

// Arithmetic mean of local vectors for one layer.
SteeringVector global_steering_vector(const std::vector<SteeringVector>& locals);

// {layer -> vector} with a shared coefficient, applied at the first generated token.
model::InjectionPlan make_plan(const std::vector<SteeringVector>& vectors, double coefficient);

// Layer that feeds the final block: n_layers - 2 (0 for single-block models).
std::size_t default_layer(const model::ModelConfig& config);

// Binary: "ANONACTS" | u32 version | u32 count | per vector: u32 layer,
// u32 variant count, u8 global, string question id, u32 length, f32 values.
void write_vectors(const std::filesystem::path& path, const std::vector<SteeringVector>& vectors);
std::vector<SteeringVector> read_vectors(const std::filesystem::path& path);

}  // namespace anonact::steer
