#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "atsn/common.hpp"
#include "atsn/corpus.hpp"
#include "atsn/matrix.hpp"
#include "atsn/optim.hpp"
#include "atsn/rng.hpp"
#include "atsn/tokenizer.hpp"

namespace atsn {

inline constexpr double kLayerNormEps = 1e-5;

struct EncoderConfig {
  int layers = 4;
  int heads = 4;
  int hidden = 192;
  int ff = 384;
  int vocab = 0;
  int max_pos = 128;

  int head_dim() const { return hidden / heads; }

  void validate() const {
    if (layers < 1) throw UsageError("encoder needs at least one layer");
    if (heads < 1) throw UsageError("encoder needs at least one head");
    if (hidden < 1 || ff < 1) throw UsageError("encoder hidden/ff sizes must be positive");
    if (hidden % heads != 0) {
      throw UsageError("hidden size " + std::to_string(hidden) + " is not divisible by " +
                       std::to_string(heads) + " heads");
    }
    if (vocab < Vocabulary::kReserved + 1) throw UsageError("encoder vocab size too small");
    if (max_pos < 1) throw UsageError("encoder max_pos must be positive");
  }
};

template <class S>
struct EncoderLayerParams {
  Mat<S> wq, bq, wk, bk, wv, bv, wo, bo;      // projections h x h, biases 1 x h
  Mat<S> ln1_gamma, ln1_beta;                 // 1 x h
  Mat<S> w1, b1;                              // h x f, 1 x f
  Mat<S> w2, b2;                              // f x h, 1 x h
  Mat<S> ln2_gamma, ln2_beta;                 // 1 x h
};

template <class S>
struct EncoderParams {
  EncoderConfig config;
  Mat<S> tok_emb;   // vocab x h
  Mat<S> pos_emb;   // max_pos x h
  std::vector<EncoderLayerParams<S>> layers;
  Mat<S> mlm_out;   // h x vocab, masked-token prediction head

  // Stable name/order contract shared by the optimizer, serializer and
  // finite-difference checks.
  std::vector<TensorRef<S>> tensors() {
    std::vector<TensorRef<S>> out;
    out.push_back({"tok_emb", &tok_emb});
    out.push_back({"pos_emb", &pos_emb});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      auto& lay = layers[l];
      out.push_back({p + "wq", &lay.wq});
      out.push_back({p + "bq", &lay.bq});
      out.push_back({p + "wk", &lay.wk});
      out.push_back({p + "bk", &lay.bk});
      out.push_back({p + "wv", &lay.wv});
      out.push_back({p + "bv", &lay.bv});
      out.push_back({p + "wo", &lay.wo});
      out.push_back({p + "bo", &lay.bo});
      out.push_back({p + "ln1_gamma", &lay.ln1_gamma});
      out.push_back({p + "ln1_beta", &lay.ln1_beta});
      out.push_back({p + "w1", &lay.w1});
      out.push_back({p + "b1", &lay.b1});
      out.push_back({p + "w2", &lay.w2});
      out.push_back({p + "b2", &lay.b2});
      out.push_back({p + "ln2_gamma", &lay.ln2_gamma});
      out.push_back({p + "ln2_beta", &lay.ln2_beta});
    }
    out.push_back({"mlm_out", &mlm_out});
    return out;
  }
};

// Everything the feature extractor reads: one hidden-state matrix per layer
// (index 0 is the embedding output) and one attention matrix per layer/head.
template <class S>
struct EncoderTrace {
  std::vector<Mat<S>> hidden;                  // (L+1) of n x h
  std::vector<std::vector<Mat<S>>> attention;  // L x H of n x n
};

template <class S>
struct LayerNormCache {
  Mat<S> xhat;
  std::vector<S> invstd;
};

template <class S>
struct EncoderLayerCache {
  Mat<S> q, k, v;          // n x h, heads packed
  Mat<S> attn_concat;      // n x h, heads merged before the output projection
  Mat<S> attn_residual;    // x + attention output (layer-norm 1 input)
  LayerNormCache<S> ln1;
  Mat<S> ln1_out;          // n x h
  Mat<S> ff_act;           // n x f, after ReLU
  Mat<S> ff_residual;      // ln1_out + ff output (layer-norm 2 input)
  LayerNormCache<S> ln2;
};

template <class S>
struct EncoderCache {
  TokenSequence tokens;
  EncoderTrace<S> trace;
  std::vector<EncoderLayerCache<S>> layers;
};

template <class S>
EncoderParams<S> zero_params(const EncoderConfig& c) {
  EncoderParams<S> z;
  z.config = c;
  z.tok_emb = Mat<S>(c.vocab, c.hidden);
  z.pos_emb = Mat<S>(c.max_pos, c.hidden);
  z.layers.resize(c.layers);
  for (auto& lay : z.layers) {
    lay.wq = lay.wk = lay.wv = lay.wo = Mat<S>(c.hidden, c.hidden);
    lay.bq = lay.bk = lay.bv = lay.bo = Mat<S>(1, c.hidden);
    lay.ln1_gamma = lay.ln1_beta = lay.ln2_gamma = lay.ln2_beta = Mat<S>(1, c.hidden);
    lay.w1 = Mat<S>(c.hidden, c.ff);
    lay.b1 = Mat<S>(1, c.ff);
    lay.w2 = Mat<S>(c.ff, c.hidden);
    lay.b2 = Mat<S>(1, c.hidden);
  }
  z.mlm_out = Mat<S>(c.hidden, c.vocab);
  return z;
}

template <class S>
EncoderParams<S> zero_like(const EncoderParams<S>& params) {
  return zero_params<S>(params.config);
}

template <class S>
void zero_tensors(EncoderParams<S>& params) {
  for (auto& t : params.tensors()) t.mat->zero();
}

// Deterministic init: weights and embeddings are normal with scale
// 1/sqrt(hidden); biases zero; layer-norm scale 1, shift 0. Draws happen in
// tensor order so equal (config, seed) gives bit-identical parameters.
template <class S>
EncoderParams<S> init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderParams<S> params = zero_params<S>(config);
  Rng rng(derive_seed(seed, SeedStream::EncoderInit));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (auto& t : params.tensors()) {
    const bool is_bias = t.name.find(".b") != std::string::npos;
    const bool is_gamma = t.name.find("ln") != std::string::npos && t.name.find("gamma") != std::string::npos;
    const bool is_beta = t.name.find("ln") != std::string::npos && t.name.find("beta") != std::string::npos;
    for (auto& x : t.mat->a) {
      if (is_gamma) {
        x = S(1);
      } else if (is_bias || is_beta) {
        x = S(0);
      } else {
        x = static_cast<S>(rng.normal() * scale);
      }
    }
  }
  return params;
}

namespace detail {

template <class S>
void layer_norm_forward(const Mat<S>& X, const Mat<S>& gamma, const Mat<S>& beta, Mat<S>& Y,
                        LayerNormCache<S>& cache) {
  const int n = X.rows, h = X.cols;
  Y = Mat<S>(n, h);
  cache.xhat = Mat<S>(n, h);
  cache.invstd.assign(n, S(0));
  const S* g = gamma.row(0);
  const S* b = beta.row(0);
  for (int i = 0; i < n; ++i) {
    const S* x = X.row(i);
    S mean = S(0);
    for (int j = 0; j < h; ++j) mean += x[j];
    mean /= S(h);
    S var = S(0);
    for (int j = 0; j < h; ++j) {
      const S d = x[j] - mean;
      var += d * d;
    }
    var /= S(h);
    const S inv = S(1) / std::sqrt(var + S(kLayerNormEps));
    cache.invstd[i] = inv;
    S* xh = cache.xhat.row(i);
    S* y = Y.row(i);
    for (int j = 0; j < h; ++j) {
      xh[j] = (x[j] - mean) * inv;
      y[j] = g[j] * xh[j] + b[j];
    }
  }
}

template <class S>
void layer_norm_backward(const Mat<S>& dY, const Mat<S>& gamma, const LayerNormCache<S>& cache,
                         Mat<S>& dX, Mat<S>& dGamma, Mat<S>& dBeta) {
  const int n = dY.rows, h = dY.cols;
  ensure_shape(dX, n, h, false);
  const S* g = gamma.row(0);
  S* dg = dGamma.row(0);
  S* db = dBeta.row(0);
  for (int i = 0; i < n; ++i) {
    const S* dy = dY.row(i);
    const S* xh = cache.xhat.row(i);
    const S inv = cache.invstd[i];
    S sum_dxhat = S(0);
    S sum_dxhat_xhat = S(0);
    for (int j = 0; j < h; ++j) {
      const S dxh = dy[j] * g[j];
      sum_dxhat += dxh;
      sum_dxhat_xhat += dxh * xh[j];
      dg[j] += dy[j] * xh[j];
      db[j] += dy[j];
    }
    const S mean_dxhat = sum_dxhat / S(h);
    const S mean_dxhat_xhat = sum_dxhat_xhat / S(h);
    S* dx = dX.row(i);
    for (int j = 0; j < h; ++j) {
      const S dxh = dy[j] * g[j];
      dx[j] = inv * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
    }
  }
}

// Softmax over allowed key positions; disallowed keys get exactly zero.
template <class S>
void masked_softmax_row(S* s, int n, const std::vector<std::uint8_t>& keymask) {
  S mx = -std::numeric_limits<S>::infinity();
  for (int j = 0; j < n; ++j) {
    if (keymask[j] && s[j] > mx) mx = s[j];
  }
  S denom = S(0);
  for (int j = 0; j < n; ++j) {
    if (keymask[j]) {
      s[j] = std::exp(s[j] - mx);
      denom += s[j];
    } else {
      s[j] = S(0);
    }
  }
  for (int j = 0; j < n; ++j) s[j] /= denom;
}

}  // namespace detail

// Full forward pass recording every hidden state, every attention matrix and
// the intermediates the backward pass needs. Padded key positions are
// excluded from every softmax, so padding cannot influence real positions.
template <class S>
void encoder_forward(const EncoderParams<S>& params, const TokenSequence& tokens,
                     EncoderCache<S>& cache) {
  const auto& c = params.config;
  const int n = tokens.length();
  if (n < 1) throw DataError("cannot run the encoder on an empty sequence");
  if (n > c.max_pos) {
    throw DataError("sequence length " + std::to_string(n) + " exceeds max_pos " +
                    std::to_string(c.max_pos));
  }
  if (tokens.real_len() < 1) throw DataError("sequence has no real tokens");
  for (int id : tokens.ids) {
    if (id < 0 || id >= c.vocab) throw DataError("token id " + std::to_string(id) + " out of vocabulary");
  }

  const int h = c.hidden;
  const int dh = c.head_dim();
  const S alpha = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));

  cache.tokens = tokens;
  cache.trace.hidden.assign(c.layers + 1, Mat<S>());
  cache.trace.attention.assign(c.layers, std::vector<Mat<S>>(c.heads));
  cache.layers.assign(c.layers, EncoderLayerCache<S>());

  Mat<S>& h0 = cache.trace.hidden[0];
  h0 = Mat<S>(n, h);
  for (int i = 0; i < n; ++i) {
    const S* te = params.tok_emb.row(tokens.ids[i]);
    const S* pe = params.pos_emb.row(i);
    S* out = h0.row(i);
    for (int j = 0; j < h; ++j) out[j] = te[j] + pe[j];
  }

  for (int l = 0; l < c.layers; ++l) {
    const auto& lay = params.layers[l];
    auto& lc = cache.layers[l];
    const Mat<S>& X = cache.trace.hidden[l];

    matmul(X, lay.wq, lc.q);
    add_bias(lc.q, lay.bq);
    matmul(X, lay.wk, lc.k);
    add_bias(lc.k, lay.bk);
    matmul(X, lay.wv, lc.v);
    add_bias(lc.v, lay.bv);

    lc.attn_concat = Mat<S>(n, h);
    for (int head = 0; head < c.heads; ++head) {
      const int off = head * dh;
      Mat<S>& A = cache.trace.attention[l][head];
      A = Mat<S>(n, n);
      for (int i = 0; i < n; ++i) {
        const S* qi = lc.q.row(i) + off;
        S* arow = A.row(i);
        for (int j = 0; j < n; ++j) {
          const S* kj = lc.k.row(j) + off;
          S dot = S(0);
          for (int d = 0; d < dh; ++d) dot += qi[d] * kj[d];
          arow[j] = dot * alpha;
        }
        detail::masked_softmax_row(arow, n, tokens.mask);
        S* out = lc.attn_concat.row(i) + off;
        for (int j = 0; j < n; ++j) {
          const S aij = arow[j];
          if (aij == S(0)) continue;
          const S* vj = lc.v.row(j) + off;
          for (int d = 0; d < dh; ++d) out[d] += aij * vj[d];
        }
      }
    }

    Mat<S> attn_out;
    matmul(lc.attn_concat, lay.wo, attn_out);
    add_bias(attn_out, lay.bo);

    lc.attn_residual = Mat<S>(n, h);
    for (std::size_t i = 0; i < lc.attn_residual.a.size(); ++i) {
      lc.attn_residual.a[i] = X.a[i] + attn_out.a[i];
    }
    detail::layer_norm_forward(lc.attn_residual, lay.ln1_gamma, lay.ln1_beta, lc.ln1_out, lc.ln1);

    Mat<S> ff_pre;
    matmul(lc.ln1_out, lay.w1, ff_pre);
    add_bias(ff_pre, lay.b1);
    lc.ff_act = std::move(ff_pre);
    relu_inplace(lc.ff_act);

    Mat<S> ff_out;
    matmul(lc.ff_act, lay.w2, ff_out);
    add_bias(ff_out, lay.b2);

    lc.ff_residual = Mat<S>(n, h);
    for (std::size_t i = 0; i < lc.ff_residual.a.size(); ++i) {
      lc.ff_residual.a[i] = lc.ln1_out.a[i] + ff_out.a[i];
    }
    detail::layer_norm_forward(lc.ff_residual, lay.ln2_gamma, lay.ln2_beta,
                               cache.trace.hidden[l + 1], lc.ln2);
  }
}

template <class S>
EncoderTrace<S> forward(const EncoderParams<S>& params, const TokenSequence& tokens) {
  EncoderCache<S> cache;
  encoder_forward(params, tokens, cache);
  return std::move(cache.trace);
}

// Backpropagates d(loss)/d(last hidden state) through every layer down to
// the embeddings, accumulating into grads (same shapes as the parameters).
template <class S>
void encoder_backward(const EncoderParams<S>& params, const EncoderCache<S>& cache,
                      const Mat<S>& d_last, EncoderParams<S>& grads) {
  const auto& c = params.config;
  const int n = cache.tokens.length();
  const int h = c.hidden;
  const int dh = c.head_dim();
  const S alpha = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));

  Mat<S> dY = d_last;
  Mat<S> dZ, dY1, dFF, dAttnOut, dO, dQ, dK, dV, dX, tmp;
  std::vector<S> dArow(n), dSrow(n);

  for (int l = c.layers - 1; l >= 0; --l) {
    const auto& lay = params.layers[l];
    auto& glay = grads.layers[l];
    const auto& lc = cache.layers[l];
    const Mat<S>& X = cache.trace.hidden[l];

    // layer norm 2
    detail::layer_norm_backward(dY, lay.ln2_gamma, lc.ln2, dZ, glay.ln2_gamma, glay.ln2_beta);

    // residual: ff_residual = ln1_out + ff_out
    dY1 = dZ;

    // feed-forward: ff_out = relu(ln1_out*w1 + b1) * w2 + b2
    matmul_tn(lc.ff_act, dZ, glay.w2, true);
    colsum(dZ, glay.b2, true);
    matmul_nt(dZ, lay.w2, dFF);
    for (std::size_t i = 0; i < dFF.a.size(); ++i) {
      if (lc.ff_act.a[i] <= S(0)) dFF.a[i] = S(0);
    }
    matmul_tn(lc.ln1_out, dFF, glay.w1, true);
    colsum(dFF, glay.b1, true);
    matmul_nt(dFF, lay.w1, dY1, true);

    // layer norm 1
    detail::layer_norm_backward(dY1, lay.ln1_gamma, lc.ln1, dZ, glay.ln1_gamma, glay.ln1_beta);

    // residual: attn_residual = X + attn_out
    dX = dZ;
    dAttnOut = dZ;

    // output projection
    matmul_tn(lc.attn_concat, dAttnOut, glay.wo, true);
    colsum(dAttnOut, glay.bo, true);
    matmul_nt(dAttnOut, lay.wo, dO);

    // per-head attention backward
    detail::ensure_shape(dQ, n, h, false);
    detail::ensure_shape(dK, n, h, false);
    detail::ensure_shape(dV, n, h, false);
    for (int head = 0; head < c.heads; ++head) {
      const int off = head * dh;
      const Mat<S>& A = cache.trace.attention[l][head];
      for (int i = 0; i < n; ++i) {
        const S* doi = dO.row(i) + off;
        const S* arow = A.row(i);
        // dA and the softmax backward for this query row
        S dot_da_a = S(0);
        for (int j = 0; j < n; ++j) {
          const S* vj = lc.v.row(j) + off;
          S da = S(0);
          for (int d = 0; d < dh; ++d) da += doi[d] * vj[d];
          dArow[j] = da;
          dot_da_a += da * arow[j];
        }
        for (int j = 0; j < n; ++j) dSrow[j] = arow[j] * (dArow[j] - dot_da_a);
        // dV += A^T dO ; dQ += alpha * dS K ; dK += alpha * dS^T Q
        S* dqi = dQ.row(i) + off;
        const S* qi = lc.q.row(i) + off;
        for (int j = 0; j < n; ++j) {
          const S aij = arow[j];
          if (aij != S(0)) {
            S* dvj = dV.row(j) + off;
            for (int d = 0; d < dh; ++d) dvj[d] += aij * doi[d];
          }
          const S ds = dSrow[j] * alpha;
          if (ds != S(0)) {
            const S* kj = lc.k.row(j) + off;
            S* dkj = dK.row(j) + off;
            for (int d = 0; d < dh; ++d) {
              dqi[d] += ds * kj[d];
              dkj[d] += ds * qi[d];
            }
          }
        }
      }
    }

    // input projections
    matmul_tn(X, dQ, glay.wq, true);
    colsum(dQ, glay.bq, true);
    matmul_nt(dQ, lay.wq, dX, true);
    matmul_tn(X, dK, glay.wk, true);
    colsum(dK, glay.bk, true);
    matmul_nt(dK, lay.wk, dX, true);
    matmul_tn(X, dV, glay.wv, true);
    colsum(dV, glay.bv, true);
    matmul_nt(dV, lay.wv, dX, true);

    dY = dX;
  }

  for (int i = 0; i < n; ++i) {
    const S* d = dY.row(i);
    S* gt = grads.tok_emb.row(cache.tokens.ids[i]);
    S* gp = grads.pos_emb.row(i);
    for (int j = 0; j < h; ++j) {
      gt[j] += d[j];
      gp[j] += d[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Masked-token pretraining

struct MlmHyper {
  double mask_prob = 0.15;
  double lr = 3e-4;
  int batch = 32;
  int epochs = 1;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
};

struct MlmLog {
  std::vector<double> epoch_loss;
};

namespace detail {

// Cross-entropy of the original ids at the masked positions; adds the
// per-position gradient into grads (encoder + mlm head), scaled by `scale`.
template <class S>
S mlm_loss_and_grads(const EncoderParams<S>& params, const EncoderCache<S>& cache,
                     const std::vector<int>& masked_pos, const std::vector<int>& targets,
                     S scale, EncoderParams<S>& grads) {
  const auto& c = params.config;
  const Mat<S>& last = cache.trace.hidden.back();
  Mat<S> d_last(last.rows, last.cols);
  std::vector<S> logits(c.vocab), probs(c.vocab);
  S loss = S(0);
  for (std::size_t m = 0; m < masked_pos.size(); ++m) {
    const int pos = masked_pos[m];
    const int target = targets[m];
    const S* hrow = last.row(pos);
    for (int vtok = 0; vtok < c.vocab; ++vtok) {
      S dot = S(0);
      for (int j = 0; j < c.hidden; ++j) dot += hrow[j] * params.mlm_out.at(j, vtok);
      logits[vtok] = dot;
    }
    S mx = logits[0];
    for (int vtok = 1; vtok < c.vocab; ++vtok) mx = std::max(mx, logits[vtok]);
    S denom = S(0);
    for (int vtok = 0; vtok < c.vocab; ++vtok) {
      probs[vtok] = std::exp(logits[vtok] - mx);
      denom += probs[vtok];
    }
    loss += std::log(denom) + mx - logits[target];
    for (int vtok = 0; vtok < c.vocab; ++vtok) {
      S g = probs[vtok] / denom;
      if (vtok == target) g -= S(1);
      g *= scale;
      // dW_mlm += h ⊗ g ; dH += g * W_mlm[:, vtok]
      S* dh_row = d_last.row(pos);
      for (int j = 0; j < c.hidden; ++j) {
        grads.mlm_out.at(j, vtok) += hrow[j] * g;
        dh_row[j] += g * params.mlm_out.at(j, vtok);
      }
    }
  }
  encoder_backward(params, cache, d_last, grads);
  return loss;
}

}  // namespace detail

// Desk-scale stand-in for a pre-trained checkpoint: Bernoulli(mask_prob)
// masking of real tokens, cross-entropy recovery of the original ids, Adam
// over all encoder parameters. Tweets shorter than two tokens are skipped;
// it is an error if nothing remains.
template <class S>
MlmLog pretrain_mlm(EncoderParams<S>& params, const LabeledDataset& corpus, const Vocabulary& vocab,
                    int cap, const MlmHyper& hyper) {
  if (corpus.tweets.empty()) throw DataError("cannot pretrain on an empty corpus");
  if (hyper.mask_prob < 0.0 || hyper.mask_prob > 1.0) throw UsageError("mask_prob must be in [0, 1]");
  if (hyper.batch < 1 || hyper.epochs < 0) throw UsageError("bad pretraining hyperparameters");

  std::vector<TokenSequence> encoded;
  encoded.reserve(corpus.size());
  for (const auto& tweet : corpus.tweets) {
    TokenSequence seq = encode_unbounded(tweet.text, vocab, cap);
    if (seq.length() >= 2) encoded.push_back(std::move(seq));
  }
  if (encoded.empty()) throw DataError("degenerate corpus: all tweets shorter than 2 tokens");

  AdamHyper ah;
  ah.lr = hyper.lr;
  ah.weight_decay = hyper.weight_decay;
  auto tensors = params.tensors();
  Adam<S> adam(tensors, ah);
  EncoderParams<S> grads = zero_like(params);
  auto grad_tensors = grads.tensors();

  MlmLog log;
  EncoderCache<S> cache;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto order = shuffled_indices(encoded.size(), derive_seed(hyper.seed, SeedStream::Pretrain, 2 * epoch));
    Rng mask_rng(derive_seed(hyper.seed, SeedStream::Pretrain, 2 * epoch + 1));
    double epoch_loss = 0.0;
    std::size_t epoch_masked = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch);
      // Draw all masks first so randomness is independent of evaluation order.
      struct Item {
        TokenSequence masked;
        std::vector<int> pos;
        std::vector<int> target;
      };
      std::vector<Item> items;
      std::size_t batch_masked = 0;
      for (std::size_t b = start; b < stop; ++b) {
        const TokenSequence& seq = encoded[order[b]];
        Item item;
        item.masked = seq;
        for (int i = 0; i < seq.length(); ++i) {
          if (mask_rng.bernoulli(hyper.mask_prob)) {
            item.pos.push_back(i);
            item.target.push_back(seq.ids[i]);
            item.masked.ids[i] = Vocabulary::kMask;
          }
        }
        batch_masked += item.pos.size();
        items.push_back(std::move(item));
      }
      if (batch_masked == 0) continue;

      zero_tensors(grads);
      const S scale = S(1) / static_cast<S>(batch_masked);
      double batch_loss = 0.0;
      for (const auto& item : items) {
        if (item.pos.empty()) continue;
        encoder_forward(params, item.masked, cache);
        batch_loss += static_cast<double>(
            detail::mlm_loss_and_grads(params, cache, item.pos, item.target, scale, grads));
      }
      batch_loss /= static_cast<double>(batch_masked);
      if (!std::isfinite(batch_loss)) throw NumericError("masked-token pretraining loss diverged");
      adam.step(tensors, grad_tensors);
      epoch_loss += batch_loss * static_cast<double>(batch_masked);
      epoch_masked += batch_masked;
    }
    log.epoch_loss.push_back(epoch_masked ? epoch_loss / static_cast<double>(epoch_masked) : 0.0);
  }
  return log;
}

}  // namespace atsn
