#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "anonact/nn/param_store.hpp"

namespace anonact::model {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 128;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t context_len = 64;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t hidden_dim() const { return 4 * d_model; }
  // Throws ArgumentError on inconsistent sizes.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Residual read points. Layer l means the residual stream after block l
// (both residual additions done, before block l + 1).
struct TapSpec {
  std::set<std::size_t> layers;
  std::size_t position = 0;
};

// Additive intervention: coefficient * vector is added to the residual of the
// current (last) position right after each listed block.
struct InjectionPlan {
  std::map<std::size_t, std::vector<float>> vectors;
  double coefficient = 1.0;
  // Decode step at which the plan applies; 0 is the first generated token.
  std::size_t active_step = 0;

  bool inert() const { return vectors.empty() || coefficient == 0.0; }
};

struct ActivationRecord {
  std::map<std::size_t, std::vector<float>> layers;
};

// Pre-norm decoder-only transformer:
//   x = tok_emb + pos_emb
//   per block: x += attn(ln1(x)); x += mlp(ln2(x))   (GELU, 4x hidden)
//   logits = ln_f(x) W_out + b_out                   (untied output)
template <typename T>
class ModelT {
 public:
  struct BlockIndex {
    std::size_t ln1_gain, ln1_bias, w_qkv, b_qkv, w_attn_out, b_attn_out;
    std::size_t ln2_gain, ln2_bias, w_fc, b_fc, w_proj, b_proj;
  };

  // Fresh model with parameters drawn from config.seed.
  explicit ModelT(ModelConfig config);
  // Adopts existing parameters; names and shapes must match the layout.
  ModelT(ModelConfig config, nn::ParamStore<T> params);

  const ModelConfig& config() const { return config_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

  std::span<const T> value(std::size_t index) const { return params_[index].value.data(); }
  std::span<T> grad(std::size_t index) { return params_[index].grad.data(); }

  const BlockIndex& block(std::size_t l) const { return blocks_[l]; }
  std::size_t tok_emb() const { return tok_emb_; }
  std::size_t pos_emb() const { return pos_emb_; }
  std::size_t lnf_gain() const { return lnf_gain_; }
  std::size_t lnf_bias() const { return lnf_bias_; }
  std::size_t w_out() const { return w_out_; }
  std::size_t b_out() const { return b_out_; }

  template <typename U>
  ModelT<U> cast() const {
    return ModelT<U>(config_, params_.template cast<U>());
  }

  static constexpr T kLayerNormEpsilon = static_cast<T>(1e-5);

 private:
  void resolve_layout();

  ModelConfig config_;
  nn::ParamStore<T> params_;
  std::vector<BlockIndex> blocks_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_gain_ = 0, lnf_bias_ = 0, w_out_ = 0, b_out_ = 0;
};

using Model = ModelT<float>;

// Layout shared by construction and checkpoint validation: (name, shape) in order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(
    const ModelConfig& config);

// ---- inference ---------------------------------------------------------------

// Per-layer keys/values for positions [0, length).
struct KvCache {
  std::size_t length = 0;
  std::vector<std::vector<float>> keys;
  std::vector<std::vector<float>> values;
};

KvCache make_cache(const Model& model);

// Runs positions [cache.length, cache.length + tokens.size()) and appends
// their keys/values. Each row is computed by the same kernels in the same
// order whether positions arrive one at a time or all at once, so extending
// token by token is bit-identical to one full forward pass. `plan` is applied
// at the last new position; `taps` records rows within the new range.
std::vector<float> extend(const Model& model, KvCache& cache, std::span<const int> tokens,
                          const InjectionPlan* plan = nullptr, const TapSpec* taps = nullptr,
                          ActivationRecord* record = nullptr);

struct TapResult {
  std::vector<float> logits;
  ActivationRecord record;
};

// Full forward over `tokens`; logits for the last position.
std::vector<float> forward(const Model& model, std::span<const int> tokens);
TapResult forward_with_taps(const Model& model, std::span<const int> tokens, const TapSpec& taps);
std::vector<float> forward_with_injection(const Model& model, std::span<const int> tokens,
                                          const InjectionPlan& plan);

// ---- training ----------------------------------------------------------------

// Weighted next-token cross-entropy of one sequence:
//   loss = sum_i w_i * CE(logits_i, targets_i) / sum_i w_i
// Positions with w_i == 0 are skipped. Adds grad_scale * d(loss)/d(params) to
// the parameter gradient accumulators and returns the loss.
template <typename T>
T loss_and_grad(ModelT<T>& model, std::span<const int> tokens, std::span<const int> targets,
                std::span<const T> weights, T grad_scale);

// Same loss without touching gradients.
template <typename T>
T sequence_loss(const ModelT<T>& model, std::span<const int> tokens, std::span<const int> targets,
                std::span<const T> weights);

}  // namespace anonact::model
