#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "atsn/common.hpp"
#include "atsn/encoder.hpp"
#include "atsn/matrix.hpp"
#include "atsn/optim.hpp"
#include "atsn/rng.hpp"

namespace atsn {

// Width rule: half again the input width, floored to a multiple of 50 and
// never below d_in + 1. Gives 1500 hidden units for the 1024-feature
// embedding.
inline int default_mlp_width(int d_in) {
  const int raw = std::max(d_in + d_in / 2, d_in + 1);
  const int floored = (raw / 50) * 50;
  return std::max(floored, d_in + 1);
}

// Three hidden ReLU layers of equal width, sigmoid output, inverted dropout
// after each hidden activation.
template <class S>
struct MlpParams {
  static constexpr int kHiddenLayers = 3;

  int d_in = 0;
  int width = 0;
  S dropout_p = S(0);
  std::array<Mat<S>, 4> w;  // d_in x w, w x w, w x w, w x 1
  std::array<Mat<S>, 4> b;  // 1 x w, 1 x w, 1 x w, 1 x 1

  std::vector<TensorRef<S>> tensors() {
    std::vector<TensorRef<S>> out;
    for (int l = 0; l < 4; ++l) {
      out.push_back({"w" + std::to_string(l), &w[l]});
      out.push_back({"b" + std::to_string(l), &b[l]});
    }
    return out;
  }
};

template <class S>
MlpParams<S> init_mlp(int d_in, int width, double dropout_p, std::uint64_t seed) {
  if (d_in < 1) throw UsageError("mlp input dimension must be positive");
  if (width == 0) width = default_mlp_width(d_in);
  if (width < 1) throw UsageError("mlp width must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw UsageError("dropout rate must be in [0, 1)");

  MlpParams<S> p;
  p.d_in = d_in;
  p.width = width;
  p.dropout_p = static_cast<S>(dropout_p);
  const int dims[5] = {d_in, width, width, width, 1};
  Rng rng(derive_seed(seed, SeedStream::MlpInit));
  for (int l = 0; l < 4; ++l) {
    p.w[l] = Mat<S>(dims[l], dims[l + 1]);
    p.b[l] = Mat<S>(1, dims[l + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (auto& x : p.w[l].a) x = static_cast<S>(rng.normal() * scale);
  }
  return p;
}

// Zeroes each entry with probability p and scales survivors by 1/(1-p), so
// eval-time forward passes need no rescaling.
template <class S>
void inverted_dropout(S* x, std::size_t n, S p, Rng& rng) {
  if (p <= S(0)) return;
  const S keep_scale = S(1) / (S(1) - p);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.bernoulli(static_cast<double>(p)) ? S(0) : x[i] * keep_scale;
  }
}

template <class S>
S mlp_logit_eval(const MlpParams<S>& params, const S* x) {
  std::vector<S> cur(x, x + params.d_in), next;
  for (int l = 0; l < 3; ++l) {
    const Mat<S>& w = params.w[l];
    next.assign(w.cols, S(0));
    for (int i = 0; i < w.rows; ++i) {
      const S xi = cur[i];
      if (xi == S(0)) continue;
      const S* wrow = w.row(i);
      for (int j = 0; j < w.cols; ++j) next[j] += xi * wrow[j];
    }
    const S* bias = params.b[l].row(0);
    for (int j = 0; j < w.cols; ++j) {
      next[j] += bias[j];
      if (next[j] < S(0)) next[j] = S(0);
    }
    cur.swap(next);
  }
  S z = params.b[3].at(0, 0);
  for (int i = 0; i < params.width; ++i) z += cur[i] * params.w[3].at(i, 0);
  return z;
}

template <class S>
S mlp_forward_eval(const MlpParams<S>& params, const S* x) {
  return sigmoid(mlp_logit_eval(params, x));
}

// Training-mode forward for a single sample; the dropout masks are drawn
// deterministically from mask_seed.
template <class S>
S mlp_forward_train(const MlpParams<S>& params, const S* x, std::uint64_t mask_seed) {
  Rng rng(mask_seed);
  std::vector<S> cur(x, x + params.d_in), next;
  for (int l = 0; l < 3; ++l) {
    const Mat<S>& w = params.w[l];
    next.assign(w.cols, S(0));
    for (int i = 0; i < w.rows; ++i) {
      const S xi = cur[i];
      if (xi == S(0)) continue;
      const S* wrow = w.row(i);
      for (int j = 0; j < w.cols; ++j) next[j] += xi * wrow[j];
    }
    const S* bias = params.b[l].row(0);
    for (int j = 0; j < w.cols; ++j) {
      next[j] += bias[j];
      if (next[j] < S(0)) next[j] = S(0);
    }
    inverted_dropout(next.data(), next.size(), params.dropout_p, rng);
    cur.swap(next);
  }
  S z = params.b[3].at(0, 0);
  for (int i = 0; i < params.width; ++i) z += cur[i] * params.w[3].at(i, 0);
  return sigmoid(z);
}

struct TrainHyper {
  double lr = 5e-5;
  int batch = 16384;
  int epochs = 15;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;  // 0 = plain Adam, > 0 = AdamW
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = -1.0;  // < 0 when no validation set was given
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

template <class S>
void zero_tensors_mlp(MlpParams<S>& p) {
  for (auto& t : p.tensors()) t.mat->zero();
}

namespace detail {

// Batch forward/backward used by training and the gradient check. Rows of X
// are samples. Dropout masks must already be expanded into `masks` (entries
// 0 or 1/(1-p)); pass empty masks for the p = 0 path.
template <class S>
struct MlpBatchCache {
  std::array<Mat<S>, 3> act;    // post-ReLU, pre-dropout
  std::array<Mat<S>, 3> kept;   // post-dropout activations fed forward
  std::vector<S> logits;
};

template <class S>
void mlp_batch_forward(const MlpParams<S>& params, const Mat<S>& X,
                       const std::array<Mat<S>, 3>* masks, MlpBatchCache<S>& cache) {
  const Mat<S>* cur = &X;
  for (int l = 0; l < 3; ++l) {
    Mat<S>& act = cache.act[l];
    matmul(*cur, params.w[l], act);
    add_bias(act, params.b[l]);
    relu_inplace(act);
    Mat<S>& kept = cache.kept[l];
    if (masks) {
      kept = act;
      const Mat<S>& m = (*masks)[l];
      for (std::size_t i = 0; i < kept.a.size(); ++i) kept.a[i] *= m.a[i];
    } else {
      kept = act;
    }
    cur = &kept;
  }
  const int n = X.rows;
  cache.logits.assign(n, S(0));
  const S bias = params.b[3].at(0, 0);
  for (int i = 0; i < n; ++i) {
    const S* h = cache.kept[2].row(i);
    S z = bias;
    for (int j = 0; j < params.width; ++j) z += h[j] * params.w[3].at(j, 0);
    cache.logits[i] = z;
  }
}

// Mean BCE over the batch; returns loss and accumulates gradients.
template <class S>
S mlp_batch_backward(const MlpParams<S>& params, const Mat<S>& X, const std::vector<int>& y,
                     const std::array<Mat<S>, 3>* masks, MlpBatchCache<S>& cache,
                     MlpParams<S>& grads) {
  const int n = X.rows;
  const S inv_n = S(1) / static_cast<S>(n);
  S loss = S(0);
  Mat<S> dz(n, 1);
  for (int i = 0; i < n; ++i) {
    const S z = cache.logits[i];
    loss += bce_from_logit(z, y[i]);
    dz.at(i, 0) = (sigmoid(z) - static_cast<S>(y[i])) * inv_n;
  }
  loss *= inv_n;

  matmul_tn(cache.kept[2], dz, grads.w[3], true);
  colsum(dz, grads.b[3], true);
  Mat<S> dh;
  matmul_nt(dz, params.w[3], dh);
  for (int l = 2; l >= 0; --l) {
    if (masks) {
      const Mat<S>& m = (*masks)[l];
      for (std::size_t i = 0; i < dh.a.size(); ++i) dh.a[i] *= m.a[i];
    }
    const Mat<S>& act = cache.act[l];
    for (std::size_t i = 0; i < dh.a.size(); ++i) {
      if (act.a[i] <= S(0)) dh.a[i] = S(0);
    }
    const Mat<S>& below = l == 0 ? X : cache.kept[l - 1];
    matmul_tn(below, dh, grads.w[l], true);
    colsum(dh, grads.b[l], true);
    if (l > 0) {
      Mat<S> dnext;
      matmul_nt(dh, params.w[l], dnext);
      dh = std::move(dnext);
    }
  }
  return loss;
}

template <class S>
MlpParams<S> zero_like(const MlpParams<S>& p) {
  MlpParams<S> z;
  z.d_in = p.d_in;
  z.width = p.width;
  z.dropout_p = p.dropout_p;
  for (int l = 0; l < 4; ++l) {
    z.w[l] = Mat<S>(p.w[l].rows, p.w[l].cols);
    z.b[l] = Mat<S>(p.b[l].rows, p.b[l].cols);
  }
  return z;
}

}  // namespace detail

// Mini-batch Adam/AdamW on BCE with per-epoch seeded shuffling. Dropout
// masks are drawn per batch; dropped units receive no gradient that step.
template <class S>
TrainLog train_mlp(MlpParams<S>& params, const Mat<S>& X, const std::vector<int>& y,
                   const TrainHyper& hyper, const Mat<S>* Xval = nullptr,
                   const std::vector<int>* yval = nullptr) {
  if (X.rows == 0) throw DataError("cannot train on an empty embedding set");
  if (static_cast<std::size_t>(X.rows) != y.size()) throw DataError("embedding/label count mismatch");
  for (int label : y) {
    if (label != 0 && label != 1) throw DataError("labels must be binary");
  }
  if (X.cols != params.d_in) throw DataError("embedding dimension does not match the classifier");

  AdamHyper ah;
  ah.lr = hyper.lr;
  ah.weight_decay = hyper.weight_decay;
  auto tensors = params.tensors();
  Adam<S> adam(tensors, ah);
  MlpParams<S> grads = detail::zero_like(params);
  auto grad_tensors = grads.tensors();

  const int n = X.rows;
  const int batch = std::max(1, std::min(hyper.batch, n));
  const S p = params.dropout_p;
  const S keep_scale = p > S(0) ? S(1) / (S(1) - p) : S(1);

  TrainLog log;
  detail::MlpBatchCache<S> cache;
  std::array<Mat<S>, 3> masks;
  Mat<S> xb;
  std::vector<int> yb;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto order = shuffled_indices(n, derive_seed(hyper.seed, SeedStream::MlpTrain, epoch));
    Rng drop_rng(derive_seed(hyper.seed, SeedStream::Dropout, epoch));
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (int start = 0; start < n; start += batch) {
      const int stop = std::min(n, start + batch);
      const int bs = stop - start;
      xb = Mat<S>(bs, X.cols);
      yb.resize(bs);
      for (int i = 0; i < bs; ++i) {
        const auto src = order[start + i];
        std::copy(X.row(static_cast<int>(src)), X.row(static_cast<int>(src)) + X.cols, xb.row(i));
        yb[i] = y[src];
      }
      const bool use_dropout = p > S(0);
      if (use_dropout) {
        for (auto& m : masks) {
          m = Mat<S>(bs, params.width);
          for (auto& v : m.a) v = drop_rng.bernoulli(static_cast<double>(p)) ? S(0) : keep_scale;
        }
      }
      detail::mlp_batch_forward(params, xb, use_dropout ? &masks : nullptr, cache);
      for (int i = 0; i < bs; ++i) {
        const int pred = cache.logits[i] > S(0) ? 1 : 0;  // sigmoid(z) > 0.5 iff z > 0
        correct += pred == yb[i];
      }
      zero_tensors_mlp(grads);
      const S batch_loss =
          detail::mlp_batch_backward(params, xb, yb, use_dropout ? &masks : nullptr, cache, grads);
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw NumericError("mlp training loss diverged (NaN/inf) at epoch " + std::to_string(epoch));
      }
      adam.step(tensors, grad_tensors);
      epoch_loss += static_cast<double>(batch_loss) * bs;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / n;
    stats.train_acc = static_cast<double>(correct) / n;
    if (Xval && yval && Xval->rows > 0) {
      std::size_t vc = 0;
      for (int i = 0; i < Xval->rows; ++i) {
        const S prob = mlp_forward_eval(params, Xval->row(i));
        vc += (prob > S(0.5) ? 1 : 0) == (*yval)[i];
      }
      stats.val_acc = static_cast<double>(vc) / Xval->rows;
    }
    log.epochs.push_back(stats);
  }
  return log;
}

// Compares analytic BCE gradients against central finite differences for
// every parameter. Requires p = 0; intended for the 64-bit instantiation.
template <class S>
double gradient_check(MlpParams<S>& params, const Mat<S>& X, const std::vector<int>& y) {
  if (params.dropout_p != S(0)) throw UsageError("gradient_check requires dropout 0");

  detail::MlpBatchCache<S> cache;
  MlpParams<S> grads = detail::zero_like(params);
  detail::mlp_batch_forward(params, X, nullptr, cache);
  detail::mlp_batch_backward(params, X, y, nullptr, cache, grads);

  const auto loss_at = [&]() -> double {
    detail::MlpBatchCache<S> c;
    detail::mlp_batch_forward(params, X, nullptr, c);
    double loss = 0.0;
    for (int i = 0; i < X.rows; ++i) loss += static_cast<double>(bce_from_logit(c.logits[i], y[i]));
    return loss / X.rows;
  };

  const double step = 1e-5;
  double max_rel = 0.0;
  auto ptensors = params.tensors();
  auto gtensors = grads.tensors();
  for (std::size_t t = 0; t < ptensors.size(); ++t) {
    auto& theta = ptensors[t].mat->a;
    const auto& g = gtensors[t].mat->a;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const S saved = theta[i];
      theta[i] = saved + static_cast<S>(step);
      const double up = loss_at();
      theta[i] = saved - static_cast<S>(step);
      const double down = loss_at();
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = static_cast<double>(g[i]);
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      if (denom < 1e-10) continue;  // both effectively zero
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Built-in classification head and end-to-end fine-tuning

template <class S>
struct HeadParams {
  Mat<S> w;  // 1 x h
  Mat<S> b;  // 1 x 1

  std::vector<TensorRef<S>> tensors() {
    return {{"head_w", &w}, {"head_b", &b}};
  }
};

template <class S>
HeadParams<S> init_head(int hidden, std::uint64_t seed) {
  HeadParams<S> head;
  head.w = Mat<S>(1, hidden);
  head.b = Mat<S>(1, 1);
  Rng rng(derive_seed(seed, SeedStream::HeadInit));
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& x : head.w.a) x = static_cast<S>(rng.normal() * scale);
  return head;
}

namespace detail {

// Mean of the final hidden states over real (unmasked) positions.
template <class S>
std::vector<S> mean_pool_last(const EncoderTrace<S>& trace, const std::vector<std::uint8_t>& mask) {
  const Mat<S>& last = trace.hidden.back();
  std::vector<S> pooled(last.cols, S(0));
  int count = 0;
  for (int i = 0; i < last.rows; ++i) {
    if (!mask[i]) continue;
    const S* row = last.row(i);
    for (int j = 0; j < last.cols; ++j) pooled[j] += row[j];
    ++count;
  }
  if (count == 0) throw DataError("cannot pool an all-padding sequence");
  for (auto& v : pooled) v /= static_cast<S>(count);
  return pooled;
}

}  // namespace detail

// Logit of the built-in classifier for an already-encoded sequence.
template <class S>
S classify_logit(const EncoderParams<S>& params, const HeadParams<S>& head,
                 const TokenSequence& tokens, EncoderCache<S>& cache) {
  encoder_forward(params, tokens, cache);
  const auto pooled = detail::mean_pool_last(cache.trace, cache.tokens.mask);
  S z = head.b.at(0, 0);
  for (std::size_t j = 0; j < pooled.size(); ++j) z += head.w.at(0, static_cast<int>(j)) * pooled[j];
  return z;
}

// BCE gradient of the built-in head for one sample, accumulated into
// encoder and head gradients with weight `scale`. Returns the sample loss.
template <class S>
S classify_loss_and_grads(const EncoderParams<S>& params, const HeadParams<S>& head,
                          const TokenSequence& tokens, int label, S scale,
                          EncoderParams<S>& enc_grads, HeadParams<S>& head_grads,
                          EncoderCache<S>& cache, S* out_logit = nullptr) {
  const S z = classify_logit(params, head, tokens, cache);
  if (out_logit) *out_logit = z;
  const S loss = bce_from_logit(z, label);
  const S dz = (sigmoid(z) - static_cast<S>(label)) * scale;

  const auto pooled = detail::mean_pool_last(cache.trace, cache.tokens.mask);
  const int h = params.config.hidden;
  for (int j = 0; j < h; ++j) head_grads.w.at(0, j) += dz * pooled[j];
  head_grads.b.at(0, 0) += dz;

  const Mat<S>& last = cache.trace.hidden.back();
  const int real = cache.tokens.real_len();
  Mat<S> d_last(last.rows, last.cols);
  const S row_grad = dz / static_cast<S>(real);
  for (int i = 0; i < last.rows; ++i) {
    if (!cache.tokens.mask[i]) continue;
    S* drow = d_last.row(i);
    for (int j = 0; j < h; ++j) drow[j] = row_grad * head.w.at(0, j);
  }
  encoder_backward(params, cache, d_last, enc_grads);
  return loss;
}

struct FineTuneHyper {
  double lr = 1e-5;
  int batch = 128;
  int epochs = 2;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  bool update_encoder = true;  // false freezes the encoder and trains the head only
};

// Joint AdamW training of the head and (unless frozen) all encoder
// parameters on sigmoid/BCE sentiment targets.
template <class S>
TrainLog fine_tune(EncoderParams<S>& enc, HeadParams<S>& head, const LabeledDataset& data,
                   const Vocabulary& vocab, int encode_len, const FineTuneHyper& hyper) {
  if (data.tweets.empty()) throw DataError("cannot fine-tune on an empty dataset");
  for (const auto& tweet : data.tweets) {
    if (tweet.label != 0 && tweet.label != 1) throw DataError("fine-tuning data must be labeled");
  }

  std::vector<TokenSequence> encoded;
  encoded.reserve(data.size());
  std::vector<int> labels;
  for (const auto& tweet : data.tweets) {
    // Padding cannot change real positions, so train on the cropped sequence.
    TokenSequence seq = crop_padding(encode(tweet.text, vocab, encode_len));
    if (seq.length() == 0) continue;
    encoded.push_back(std::move(seq));
    labels.push_back(tweet.label);
  }
  if (encoded.empty()) throw DataError("fine-tuning data has no tokens");

  AdamHyper ah;
  ah.lr = hyper.lr;
  ah.weight_decay = hyper.weight_decay;
  std::vector<TensorRef<S>> tensors = head.tensors();
  EncoderParams<S> enc_grads = zero_like(enc);
  HeadParams<S> head_grads;
  head_grads.w = Mat<S>(1, enc.config.hidden);
  head_grads.b = Mat<S>(1, 1);
  std::vector<TensorRef<S>> grad_tensors = head_grads.tensors();
  if (hyper.update_encoder) {
    for (auto& t : enc.tensors()) tensors.push_back(t);
    for (auto& t : enc_grads.tensors()) grad_tensors.push_back(t);
  }
  Adam<S> adam(tensors, ah);

  TrainLog log;
  EncoderCache<S> cache;
  const int n = static_cast<int>(encoded.size());
  const int batch = std::max(1, std::min(hyper.batch, n));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto order = shuffled_indices(n, derive_seed(hyper.seed, SeedStream::FineTune, epoch));
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (int start = 0; start < n; start += batch) {
      const int stop = std::min(n, start + batch);
      const int bs = stop - start;
      zero_tensors(enc_grads);
      head_grads.w.zero();
      head_grads.b.zero();
      const S scale = S(1) / static_cast<S>(bs);
      double batch_loss = 0.0;
      for (int bidx = start; bidx < stop; ++bidx) {
        const auto idx = order[bidx];
        S logit = S(0);
        const S loss = classify_loss_and_grads(enc, head, encoded[idx], labels[idx], scale,
                                               enc_grads, head_grads, cache, &logit);
        batch_loss += static_cast<double>(loss);
        correct += (logit > S(0) ? 1 : 0) == labels[idx];
      }
      batch_loss /= bs;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("fine-tuning loss diverged (NaN/inf) at epoch " + std::to_string(epoch));
      }
      adam.step(tensors, grad_tensors);
      epoch_loss += batch_loss * bs;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / n;
    stats.train_acc = static_cast<double>(correct) / n;
    log.epochs.push_back(stats);
  }
  return log;
}

// Sentiment probability straight from the encoder: mean-pooled final hidden
// states through the single linear head.
template <class S>
S builtin_classify(const EncoderParams<S>& enc, const HeadParams<S>& head, const std::string& text,
                   const Vocabulary& vocab, int encode_len) {
  const TokenSequence seq = crop_padding(encode(text, vocab, encode_len));
  EncoderCache<S> cache;
  return sigmoid(classify_logit(enc, head, seq, cache));
}

}  // namespace atsn
