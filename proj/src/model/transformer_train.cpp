#include <algorithm>
#include <cmath>
#include <string>

#include "anonact/errors.hpp"
#include "anonact/model/transformer.hpp"
#include "anonact/nn/ops.hpp"

namespace anonact::model {

namespace {

template <typename T>
struct BlockActivations {
  std::vector<T> x_in, ln1, ln1_mean, ln1_rstd, qkv, probs, attn, x_mid;
  std::vector<T> ln2, ln2_mean, ln2_rstd, pre_gelu, post_gelu;
};

// Forward over a whole sequence keeping everything backward needs; when
// `backward` is set, also propagates gradients into the accumulators.
template <typename T>
T run_sequence(ModelT<T>& model, std::span<const int> tokens, std::span<const int> targets,
               std::span<const T> weights, T grad_scale, bool backward) {
  const auto& c = model.config();
  const std::size_t n = tokens.size();
  if (n == 0) throw ArgumentError("training sequence is empty");
  if (targets.size() != n || weights.size() != n) {
    throw ArgumentError("targets and weights must match the token count");
  }
  if (n > c.context_len) {
    throw CapacityError("training sequence of " + std::to_string(n) +
                        " tokens exceeds context length " + std::to_string(c.context_len));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= c.vocab_size ||
        targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c.vocab_size) {
      throw ArgumentError("token id outside vocabulary");
    }
  }
  T weight_sum = 0;
  for (T w : weights) {
    if (w < 0) throw ArgumentError("position weights must be non-negative");
    weight_sum += w;
  }
  if (weight_sum == 0) return T{0};

  const std::size_t d = c.d_model;
  const std::size_t hid = c.hidden_dim();
  const std::size_t nh = c.n_heads;
  const std::size_t hd = c.head_dim();
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));
  const T eps = ModelT<T>::kLayerNormEpsilon;

  std::vector<T> x(n * d);
  {
    auto tok = model.value(model.tok_emb());
    auto pos = model.value(model.pos_emb());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e = 0; e < d; ++e) {
        x[i * d + e] = tok[static_cast<std::size_t>(tokens[i]) * d + e] + pos[i * d + e];
      }
    }
  }

  std::vector<BlockActivations<T>> acts(c.n_layers);
  std::vector<T> tmp(n * d);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const auto& b = model.block(l);
    auto& A = acts[l];
    A.x_in = x;
    A.ln1.resize(n * d);
    A.ln1_mean.resize(n);
    A.ln1_rstd.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      nn::layer_norm_row<T>(std::span<const T>(x).subspan(i * d, d), model.value(b.ln1_gain),
                            model.value(b.ln1_bias), eps, std::span<T>(A.ln1).subspan(i * d, d),
                            A.ln1_mean[i], A.ln1_rstd[i]);
    }
    A.qkv.resize(n * 3 * d);
    nn::matmul_rows<T>(A.ln1, model.value(b.w_qkv), model.value(b.b_qkv), n, d, 3 * d, A.qkv);

    A.probs.assign(nh * n * n, T{0});
    A.attn.assign(n * d, T{0});
    for (std::size_t h = 0; h < nh; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* q = A.qkv.data() + i * 3 * d + h * hd;
        T* p = A.probs.data() + (h * n + i) * n;
        for (std::size_t j = 0; j <= i; ++j) {
          const T* k = A.qkv.data() + j * 3 * d + d + h * hd;
          T acc = 0;
          for (std::size_t e = 0; e < hd; ++e) acc += q[e] * k[e];
          p[j] = acc * scale;
        }
        nn::softmax_inplace(std::span<T>(p, i + 1));
        T* o = A.attn.data() + i * d + h * hd;
        for (std::size_t j = 0; j <= i; ++j) {
          const T* v = A.qkv.data() + j * 3 * d + 2 * d + h * hd;
          for (std::size_t e = 0; e < hd; ++e) o[e] += p[j] * v[e];
        }
      }
    }
    nn::matmul_rows<T>(A.attn, model.value(b.w_attn_out), model.value(b.b_attn_out), n, d, d, tmp);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += tmp[i];
    A.x_mid = x;

    A.ln2.resize(n * d);
    A.ln2_mean.resize(n);
    A.ln2_rstd.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      nn::layer_norm_row<T>(std::span<const T>(x).subspan(i * d, d), model.value(b.ln2_gain),
                            model.value(b.ln2_bias), eps, std::span<T>(A.ln2).subspan(i * d, d),
                            A.ln2_mean[i], A.ln2_rstd[i]);
    }
    A.pre_gelu.resize(n * hid);
    nn::matmul_rows<T>(A.ln2, model.value(b.w_fc), model.value(b.b_fc), n, d, hid, A.pre_gelu);
    A.post_gelu.resize(n * hid);
    for (std::size_t i = 0; i < n * hid; ++i) A.post_gelu[i] = nn::gelu(A.pre_gelu[i]);
    nn::matmul_rows<T>(A.post_gelu, model.value(b.w_proj), model.value(b.b_proj), n, hid, d, tmp);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += tmp[i];
  }

  // Output head on weighted rows only.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] > 0) rows.push_back(i);
  }
  const std::size_t m = rows.size();
  const std::size_t vocab = c.vocab_size;
  std::vector<T> lnf(m * d), lnf_mean(m), lnf_rstd(m), logits(m * vocab);
  for (std::size_t r = 0; r < m; ++r) {
    nn::layer_norm_row<T>(std::span<const T>(x).subspan(rows[r] * d, d),
                          model.value(model.lnf_gain()), model.value(model.lnf_bias()), eps,
                          std::span<T>(lnf).subspan(r * d, d), lnf_mean[r], lnf_rstd[r]);
  }
  nn::matmul_rows<T>(lnf, model.value(model.w_out()), model.value(model.b_out()), m, d, vocab,
                     logits);

  T loss = 0;
  std::vector<T> d_logits(m * vocab);
  for (std::size_t r = 0; r < m; ++r) {
    std::span<T> row(logits.data() + r * vocab, vocab);
    const int target = targets[rows[r]];
    T max_value = row[0];
    for (T v : row) max_value = std::max(max_value, v);
    T sum = 0;
    for (T v : row) sum += std::exp(v - max_value);
    const T w = weights[rows[r]] / weight_sum;
    loss += w * (std::log(sum) + max_value - row[target]);
    if (backward) {
      const T g = grad_scale * w;
      T* dl = d_logits.data() + r * vocab;
      for (std::size_t v = 0; v < vocab; ++v) dl[v] = g * std::exp(row[v] - max_value) / sum;
      dl[target] -= g;
    }
  }
  if (!std::isfinite(static_cast<double>(loss))) {
    throw TrainingError("non-finite loss");
  }
  if (!backward) return loss;

  // ---- backward ----
  std::vector<T> d_lnf(m * d, T{0});
  nn::matmul_rows_backward<T>(lnf, model.value(model.w_out()), d_logits, m, d, vocab, d_lnf,
                              model.grad(model.w_out()), model.grad(model.b_out()));
  std::vector<T> dx(n * d, T{0});
  for (std::size_t r = 0; r < m; ++r) {
    nn::layer_norm_row_backward<T>(std::span<const T>(x).subspan(rows[r] * d, d),
                                   model.value(model.lnf_gain()), lnf_mean[r], lnf_rstd[r],
                                   std::span<const T>(d_lnf).subspan(r * d, d),
                                   std::span<T>(dx).subspan(rows[r] * d, d),
                                   model.grad(model.lnf_gain()), model.grad(model.lnf_bias()));
  }

  std::vector<T> d_post(n * hid), d_ln(n * d), d_attn(n * d), d_qkv(n * 3 * d);
  for (std::size_t l = c.n_layers; l-- > 0;) {
    const auto& b = model.block(l);
    auto& A = acts[l];

    // MLP branch: x_out = x_mid + proj(gelu(fc(ln2(x_mid))))
    std::fill(d_post.begin(), d_post.end(), T{0});
    nn::matmul_rows_backward<T>(A.post_gelu, model.value(b.w_proj), dx, n, hid, d, d_post,
                                model.grad(b.w_proj), model.grad(b.b_proj));
    for (std::size_t i = 0; i < n * hid; ++i) d_post[i] *= nn::gelu_grad(A.pre_gelu[i]);
    std::fill(d_ln.begin(), d_ln.end(), T{0});
    nn::matmul_rows_backward<T>(A.ln2, model.value(b.w_fc), d_post, n, d, hid, d_ln,
                                model.grad(b.w_fc), model.grad(b.b_fc));
    for (std::size_t i = 0; i < n; ++i) {
      nn::layer_norm_row_backward<T>(std::span<const T>(A.x_mid).subspan(i * d, d),
                                     model.value(b.ln2_gain), A.ln2_mean[i], A.ln2_rstd[i],
                                     std::span<const T>(d_ln).subspan(i * d, d),
                                     std::span<T>(dx).subspan(i * d, d), model.grad(b.ln2_gain),
                                     model.grad(b.ln2_bias));
    }

    // Attention branch: x_mid = x_in + out(attn(qkv(ln1(x_in))))
    std::fill(d_attn.begin(), d_attn.end(), T{0});
    nn::matmul_rows_backward<T>(A.attn, model.value(b.w_attn_out), dx, n, d, d, d_attn,
                                model.grad(b.w_attn_out), model.grad(b.b_attn_out));
    std::fill(d_qkv.begin(), d_qkv.end(), T{0});
    std::vector<T> d_p(n);
    for (std::size_t h = 0; h < nh; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = A.probs.data() + (h * n + i) * n;
        const T* dout = d_attn.data() + i * d + h * hd;
        T dot = 0;
        for (std::size_t j = 0; j <= i; ++j) {
          const T* v = A.qkv.data() + j * 3 * d + 2 * d + h * hd;
          T* dv = d_qkv.data() + j * 3 * d + 2 * d + h * hd;
          T acc = 0;
          for (std::size_t e = 0; e < hd; ++e) {
            acc += dout[e] * v[e];
            dv[e] += p[j] * dout[e];
          }
          d_p[j] = acc;
          dot += p[j] * acc;
        }
        const T* q = A.qkv.data() + i * 3 * d + h * hd;
        T* dq = d_qkv.data() + i * 3 * d + h * hd;
        for (std::size_t j = 0; j <= i; ++j) {
          const T ds = p[j] * (d_p[j] - dot) * scale;
          const T* k = A.qkv.data() + j * 3 * d + d + h * hd;
          T* dk = d_qkv.data() + j * 3 * d + d + h * hd;
          for (std::size_t e = 0; e < hd; ++e) {
            dq[e] += ds * k[e];
            dk[e] += ds * q[e];
          }
        }
      }
    }
    std::fill(d_ln.begin(), d_ln.end(), T{0});
    nn::matmul_rows_backward<T>(A.ln1, model.value(b.w_qkv), d_qkv, n, d, 3 * d, d_ln,
                                model.grad(b.w_qkv), model.grad(b.b_qkv));
    for (std::size_t i = 0; i < n; ++i) {
      nn::layer_norm_row_backward<T>(std::span<const T>(A.x_in).subspan(i * d, d),
                                     model.value(b.ln1_gain), A.ln1_mean[i], A.ln1_rstd[i],
                                     std::span<const T>(d_ln).subspan(i * d, d),
                                     std::span<T>(dx).subspan(i * d, d), model.grad(b.ln1_gain),
                                     model.grad(b.ln1_bias));
    }
  }

  auto d_tok = model.grad(model.tok_emb());
  auto d_pos = model.grad(model.pos_emb());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = static_cast<std::size_t>(tokens[i]);
    for (std::size_t e = 0; e < d; ++e) {
      d_tok[t * d + e] += dx[i * d + e];
      d_pos[i * d + e] += dx[i * d + e];
    }
  }
  return loss;
}

}  // namespace

template <typename T>
T loss_and_grad(ModelT<T>& model, std::span<const int> tokens, std::span<const int> targets,
                std::span<const T> weights, T grad_scale) {
  return run_sequence<T>(model, tokens, targets, weights, grad_scale, true);
}

template <typename T>
T sequence_loss(const ModelT<T>& model, std::span<const int> tokens, std::span<const int> targets,
                std::span<const T> weights) {
  // The forward-only path never writes through the model.
  return run_sequence<T>(const_cast<ModelT<T>&>(model), tokens, targets, weights, T{0}, false);
}

template float loss_and_grad<float>(ModelT<float>&, std::span<const int>, std::span<const int>,
                                    std::span<const float>, float);
template double loss_and_grad<double>(ModelT<double>&, std::span<const int>, std::span<const int>,
                                      std::span<const double>, double);
template float sequence_loss<float>(const ModelT<float>&, std::span<const int>,
                                    std::span<const int>, std::span<const float>);
template double sequence_loss<double>(const ModelT<double>&, std::span<const int>,
                                      std::span<const int>, std::span<const double>);

}  // namespace anonact::model
