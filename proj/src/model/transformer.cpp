#include "anonact/model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "anonact/errors.hpp"
#include "anonact/nn/ops.hpp"

namespace anonact::model {

using nn::ParamStore;
using nn::Tensor;

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_layers == 0 || n_heads == 0 || context_len == 0) {
    throw ArgumentError("model config sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ArgumentError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                        std::to_string(n_heads));
  }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(
    const ModelConfig& c) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  const std::size_t d = c.d_model;
  const std::size_t hid = c.hidden_dim();
  layout.push_back({"tok_emb", {c.vocab_size, d}});
  layout.push_back({"pos_emb", {c.context_len, d}});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    layout.push_back({p + "ln1.gain", {d}});
    layout.push_back({p + "ln1.bias", {d}});
    layout.push_back({p + "attn.w_qkv", {d, 3 * d}});
    layout.push_back({p + "attn.b_qkv", {3 * d}});
    layout.push_back({p + "attn.w_out", {d, d}});
    layout.push_back({p + "attn.b_out", {d}});
    layout.push_back({p + "ln2.gain", {d}});
    layout.push_back({p + "ln2.bias", {d}});
    layout.push_back({p + "mlp.w_fc", {d, hid}});
    layout.push_back({p + "mlp.b_fc", {hid}});
    layout.push_back({p + "mlp.w_proj", {hid, d}});
    layout.push_back({p + "mlp.b_proj", {d}});
  }
  layout.push_back({"ln_f.gain", {d}});
  layout.push_back({"ln_f.bias", {d}});
  layout.push_back({"head.w_out", {d, c.vocab_size}});
  layout.push_back({"head.b_out", {c.vocab_size}});
  return layout;
}

template <typename T>
ModelT<T>::ModelT(ModelConfig config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double base_std = 0.02;
  const double proj_std = 0.02 / std::sqrt(2.0 * static_cast<double>(config_.n_layers));
  for (auto& [name, shape] : parameter_layout(config_)) {
    Tensor<T> value(shape);
    const bool is_gain = name.ends_with(".gain");
    const bool is_bias = name.ends_with(".bias") || name.find(".b_") != std::string::npos;
    if (is_gain) {
      value.fill(T{1});
    } else if (!is_bias) {
      const bool is_proj = name.ends_with("w_proj") || name.ends_with("attn.w_out");
      const double std = is_proj ? proj_std : base_std;
      for (auto& v : value.data()) v = static_cast<T>(normal(rng) * std);
    }
    params_.add(name, std::move(value));
  }
  resolve_layout();
}

template <typename T>
ModelT<T>::ModelT(ModelConfig config, ParamStore<T> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ArgumentError("parameter count does not match model layout");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_[i].name != layout[i].first || params_[i].value.shape() != layout[i].second) {
      throw ArgumentError("parameter " + params_[i].name + " does not match layout entry " +
                          layout[i].first);
    }
  }
  resolve_layout();
}

template <typename T>
void ModelT<T>::resolve_layout() {
  tok_emb_ = params_.index_of("tok_emb");
  pos_emb_ = params_.index_of("pos_emb");
  blocks_.clear();
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    blocks_.push_back(BlockIndex{
        params_.index_of(p + "ln1.gain"), params_.index_of(p + "ln1.bias"),
        params_.index_of(p + "attn.w_qkv"), params_.index_of(p + "attn.b_qkv"),
        params_.index_of(p + "attn.w_out"), params_.index_of(p + "attn.b_out"),
        params_.index_of(p + "ln2.gain"), params_.index_of(p + "ln2.bias"),
        params_.index_of(p + "mlp.w_fc"), params_.index_of(p + "mlp.b_fc"),
        params_.index_of(p + "mlp.w_proj"), params_.index_of(p + "mlp.b_proj")});
  }
  lnf_gain_ = params_.index_of("ln_f.gain");
  lnf_bias_ = params_.index_of("ln_f.bias");
  w_out_ = params_.index_of("head.w_out");
  b_out_ = params_.index_of("head.b_out");
}

template class ModelT<float>;
template class ModelT<double>;

// ---- inference ---------------------------------------------------------------

namespace {

void check_tokens(const ModelConfig& c, std::span<const int> tokens, std::size_t start) {
  if (start + tokens.size() > c.context_len) {
    throw CapacityError("sequence of " + std::to_string(start + tokens.size()) +
                        " tokens exceeds context length " + std::to_string(c.context_len));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= c.vocab_size) {
      throw ArgumentError("token id " + std::to_string(t) + " outside vocabulary");
    }
  }
}

void check_plan(const ModelConfig& c, const InjectionPlan& plan) {
  for (const auto& [layer, vec] : plan.vectors) {
    if (layer >= c.n_layers) {
      throw ArgumentError("injection layer " + std::to_string(layer) + " out of range");
    }
    if (vec.size() != c.d_model) {
      throw ArgumentError("injection vector length " + std::to_string(vec.size()) +
                          " != d_model " + std::to_string(c.d_model));
    }
  }
}

// Attention for query rows [first, first + n) against cached keys/values.
void attend(const ModelConfig& c, std::span<const float> qkv, const std::vector<float>& keys,
            const std::vector<float>& values, std::size_t first, std::size_t n,
            std::span<float> out) {
  const std::size_t d = c.d_model;
  const std::size_t hd = c.head_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  std::vector<float> scores(first + n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = first + i;
    const float* q_row = qkv.data() + i * 3 * d;
    float* o_row = out.data() + i * d;
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const float* q = q_row + h * hd;
      std::span<float> s(scores.data(), pos + 1);
      for (std::size_t j = 0; j <= pos; ++j) {
        const float* k = keys.data() + j * d + h * hd;
        float acc = 0.0f;
        for (std::size_t e = 0; e < hd; ++e) acc += q[e] * k[e];
        s[j] = acc * scale;
      }
      nn::softmax_inplace(s);
      float* o = o_row + h * hd;
      std::fill(o, o + hd, 0.0f);
      for (std::size_t j = 0; j <= pos; ++j) {
        const float* v = values.data() + j * d + h * hd;
        const float p = s[j];
        for (std::size_t e = 0; e < hd; ++e) o[e] += p * v[e];
      }
    }
  }
}

}  // namespace

KvCache make_cache(const Model& model) {
  const auto& c = model.config();
  KvCache cache;
  cache.keys.assign(c.n_layers, std::vector<float>(c.context_len * c.d_model, 0.0f));
  cache.values.assign(c.n_layers, std::vector<float>(c.context_len * c.d_model, 0.0f));
  return cache;
}

std::vector<float> extend(const Model& model, KvCache& cache, std::span<const int> tokens,
                          const InjectionPlan* plan, const TapSpec* taps,
                          ActivationRecord* record) {
  const auto& c = model.config();
  if (tokens.empty()) throw ArgumentError("forward requires at least one token");
  check_tokens(c, tokens, cache.length);
  if (plan) check_plan(c, *plan);
  const std::size_t first = cache.length;
  const std::size_t n = tokens.size();
  if (taps) {
    for (std::size_t l : taps->layers) {
      if (l >= c.n_layers) throw ArgumentError("tap layer " + std::to_string(l) + " out of range");
    }
    if (!taps->layers.empty() && (taps->position < first || taps->position >= first + n)) {
      throw ArgumentError("tap position " + std::to_string(taps->position) +
                          " outside computed range");
    }
  }

  const std::size_t d = c.d_model;
  const std::size_t hid = c.hidden_dim();
  std::vector<float> x(n * d), a(n * d), qkv(n * 3 * d), y(n * d), proj(n * d), h(n * hid);

  auto tok = model.value(model.tok_emb());
  auto pos = model.value(model.pos_emb());
  for (std::size_t i = 0; i < n; ++i) {
    const float* te = tok.data() + static_cast<std::size_t>(tokens[i]) * d;
    const float* pe = pos.data() + (first + i) * d;
    for (std::size_t e = 0; e < d; ++e) x[i * d + e] = te[e] + pe[e];
  }

  const bool inject = plan && !plan->inert();
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const auto& b = model.block(l);
    float mean = 0, rstd = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nn::layer_norm_row<float>(std::span<const float>(x).subspan(i * d, d), model.value(b.ln1_gain),
                                model.value(b.ln1_bias), Model::kLayerNormEpsilon,
                                std::span<float>(a).subspan(i * d, d), mean, rstd);
    }
    nn::matmul_rows<float>(a, model.value(b.w_qkv), model.value(b.b_qkv), n, d, 3 * d, qkv);
    auto& keys = cache.keys[l];
    auto& values = cache.values[l];
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(qkv.data() + i * 3 * d + d, d, keys.data() + (first + i) * d);
      std::copy_n(qkv.data() + i * 3 * d + 2 * d, d, values.data() + (first + i) * d);
    }
    attend(c, qkv, keys, values, first, n, y);
    nn::matmul_rows<float>(y, model.value(b.w_attn_out), model.value(b.b_attn_out), n, d, d, proj);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += proj[i];

    for (std::size_t i = 0; i < n; ++i) {
      nn::layer_norm_row<float>(std::span<const float>(x).subspan(i * d, d), model.value(b.ln2_gain),
                                model.value(b.ln2_bias), Model::kLayerNormEpsilon,
                                std::span<float>(a).subspan(i * d, d), mean, rstd);
    }
    nn::matmul_rows<float>(a, model.value(b.w_fc), model.value(b.b_fc), n, d, hid, h);
    for (float& v : h) v = nn::gelu(v);
    nn::matmul_rows<float>(h, model.value(b.w_proj), model.value(b.b_proj), n, hid, d, proj);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += proj[i];

    if (inject) {
      if (auto it = plan->vectors.find(l); it != plan->vectors.end()) {
        const float coef = static_cast<float>(plan->coefficient);
        float* last = x.data() + (n - 1) * d;
        for (std::size_t e = 0; e < d; ++e) last[e] += coef * it->second[e];
      }
    }
    if (taps && record && taps->layers.contains(l)) {
      const std::size_t row = taps->position - first;
      record->layers[l].assign(x.begin() + row * d, x.begin() + (row + 1) * d);
    }
  }
  cache.length += n;

  std::vector<float> final_row(d);
  float mean = 0, rstd = 0;
  nn::layer_norm_row<float>(std::span<const float>(x).subspan((n - 1) * d, d),
                            model.value(model.lnf_gain()), model.value(model.lnf_bias()),
                            Model::kLayerNormEpsilon, final_row, mean, rstd);
  std::vector<float> logits(c.vocab_size);
  nn::matmul_rows<float>(final_row, model.value(model.w_out()), model.value(model.b_out()), 1, d,
                         c.vocab_size, logits);
  return logits;
}

std::vector<float> forward(const Model& model, std::span<const int> tokens) {
  KvCache cache = make_cache(model);
  return extend(model, cache, tokens);
}

TapResult forward_with_taps(const Model& model, std::span<const int> tokens, const TapSpec& taps) {
  KvCache cache = make_cache(model);
  TapResult result;
  result.logits = extend(model, cache, tokens, nullptr, &taps, &result.record);
  return result;
}

std::vector<float> forward_with_injection(const Model& model, std::span<const int> tokens,
                                          const InjectionPlan& plan) {
  KvCache cache = make_cache(model);
  return extend(model, cache, tokens, &plan);
}

}  // namespace anonact::model
