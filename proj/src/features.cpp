#include "atsn/features.hpp"

#include <algorithm>

#include "atsn/common.hpp"

namespace atsn {

const char* hidden_mode_name(HiddenMode mode) {
  switch (mode) {
    case HiddenMode::Last1: return "last1";
    case HiddenMode::Last2Concat: return "last2-concat";
    case HiddenMode::Last4Concat: return "last4-concat";
    case HiddenMode::Last4Sum: return "last4-sum";
  }
  throw UsageError("unknown hidden mode");
}

HiddenMode hidden_mode_from_name(const std::string& name) {
  if (name == "last1") return HiddenMode::Last1;
  if (name == "last2-concat") return HiddenMode::Last2Concat;
  if (name == "last4-concat") return HiddenMode::Last4Concat;
  if (name == "last4-sum") return HiddenMode::Last4Sum;
  throw UsageError("unknown hidden mode: " + name);
}

std::string attn_reduce_name(const AttnReduceRule& rule) {
  if (rule.kind == AttnReduceRule::Kind::MeanHeadsLastLayer) return "mean";
  return "single:" + std::to_string(rule.layer) + ":" + std::to_string(rule.head);
}

AttnReduceRule attn_reduce_from_name(const std::string& name) {
  AttnReduceRule rule;
  if (name == "mean") return rule;
  if (name.rfind("single:", 0) == 0) {
    const auto rest = name.substr(7);
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      try {
        rule.kind = AttnReduceRule::Kind::SingleHead;
        rule.layer = std::stoi(rest.substr(0, colon));
        rule.head = std::stoi(rest.substr(colon + 1));
        return rule;
      } catch (const std::exception&) {

      }
    }
  }
  throw UsageError("unknown attention reduction: " + name + " (want mean or single:<layer>:<head>)");
}

void FeatureConfig::validate() const {
  if (corner_k < 2 || corner_k % 2 != 0) {
    throw UsageError("corner window k must be even and >= 2, got " + std::to_string(corner_k));
  }
  if (encode_len < 1) throw UsageError("encode_len must be >= 1");
  if (attn_cap < 16) throw UsageError("attn_cap must be >= 16");
}

int hidden_feature_len(HiddenMode mode, int hidden_size) {
  switch (mode) {
    case HiddenMode::Last1: return hidden_size;
    case HiddenMode::Last2Concat: return 2 * hidden_size;
    case HiddenMode::Last4Concat: return 4 * hidden_size;
    case HiddenMode::Last4Sum: return hidden_size;
  }
  throw UsageError("unknown hidden mode");
}

int embedding_dim(const FeatureConfig& fcfg, int hidden_size) {
  return hidden_feature_len(fcfg.hidden_mode, hidden_size) +
         (fcfg.include_attention ? fcfg.corner_k * fcfg.corner_k : 0);
}

namespace {

int layers_used(HiddenMode mode) {
  switch (mode) {
    case HiddenMode::Last1: return 1;
    case HiddenMode::Last2Concat: return 2;
    case HiddenMode::Last4Concat: return 4;
    case HiddenMode::Last4Sum: return 4;
  }
  throw UsageError("unknown hidden mode");
}

}  // namespace

std::vector<float> hidden_features(const EncoderTrace<float>& trace,
                                   const std::vector<std::uint8_t>& mask, HiddenMode mode) {
  const int L = static_cast<int>(trace.hidden.size()) - 1;
  const int used = layers_used(mode);
  if (L < used) {
    throw DataError("hidden mode " + std::string(hidden_mode_name(mode)) + " needs " +
                    std::to_string(used) + " layers, trace has " + std::to_string(L));
  }
  const int n = trace.hidden.back().rows;
  if (static_cast<int>(mask.size()) != n) throw DataError("trace and mask lengths disagree");
  const int h = trace.hidden.back().cols;
  const bool sum_mode = mode == HiddenMode::Last4Sum;
  const int out_len = sum_mode ? h : used * h;

  // Earliest selected layer first, so last4-concat lays out L-3..L.
  std::vector<const Mat<float>*> selected;
  for (int l = L - used + 1; l <= L; ++l) selected.push_back(&trace.hidden[l]);

  std::vector<double> acc(out_len, 0.0);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    ++count;
    for (std::size_t s = 0; s < selected.size(); ++s) {
      const float* row = selected[s]->row(i);
      double* dst = sum_mode ? acc.data() : acc.data() + s * h;
      for (int j = 0; j < h; ++j) dst[j] += row[j];
    }
  }
  if (count == 0) throw DataError("cannot pool an all-padding sequence");

  std::vector<float> out(out_len);
  for (int j = 0; j < out_len; ++j) out[j] = static_cast<float>(acc[j] / count);
  return out;
}

Mat<float> attn_reduce(const EncoderTrace<float>& trace, const AttnReduceRule& rule) {
  if (trace.attention.empty() || trace.attention[0].empty()) {
    throw DataError("trace has no attention matrices");
  }
  if (rule.kind == AttnReduceRule::Kind::SingleHead) {
    const int L = static_cast<int>(trace.attention.size());
    const int H = static_cast<int>(trace.attention[0].size());
    if (rule.layer < 0 || rule.layer >= L || rule.head < 0 || rule.head >= H) {
      throw DataError("attention reduction index out of range: layer " + std::to_string(rule.layer) +
                      ", head " + std::to_string(rule.head));
    }
    return trace.attention[rule.layer][rule.head];
  }
  const auto& heads = trace.attention.back();
  Mat<float> out = heads[0];
  for (std::size_t hd = 1; hd < heads.size(); ++hd) {
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += heads[hd].a[i];
  }
  const float inv = 1.0f / static_cast<float>(heads.size());
  for (auto& v : out.a) v *= inv;
  return out;
}

std::vector<float> attention_corners(const Mat<float>& A, int k) {
  if (k < 2 || k % 2 != 0) throw DataError("corner window k must be even, got " + std::to_string(k));
  const int n = A.rows;
  const int c = k / 2;
  // Implicit zero-padding to k x k keeps short matrices whole.
  const int m = std::max(n, k);
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(k) * k);
  const int row_starts[2] = {0, m - c};
  const int col_starts[2] = {0, m - c};
  for (int rb : row_starts) {
    for (int cb : col_starts) {
      for (int i = rb; i < rb + c; ++i) {
        for (int j = cb; j < cb + c; ++j) {
          out.push_back(i < n && j < n ? A.at(i, j) : 0.0f);
        }
      }
    }
  }
  return out;
}

TweetEmbedding embed_tweet(const EncoderParams<float>& params, const std::string& text,
                           const Vocabulary& vocab, const FeatureConfig& fcfg) {
  fcfg.validate();
  TweetEmbedding emb;

  // Padded positions neither attend back to real tokens nor enter the pooled
  // mean, so running the cropped sequence produces the same features as the
  // full fixed-length encoding at a fraction of the cost.
  const TokenSequence fixed = encode(text, vocab, fcfg.encode_len);
  const TokenSequence cropped = crop_padding(fixed);
  if (cropped.length() == 0) throw DataError("cannot embed a tweet with no tokens");
  const EncoderTrace<float> trace = forward(params, cropped);
  emb.values = hidden_features(trace, cropped.mask, fcfg.hidden_mode);
  emb.hidden_len = static_cast<int>(emb.values.size());

  if (fcfg.include_attention) {
    const TokenSequence unbounded = encode_unbounded(text, vocab, fcfg.attn_cap);
    const EncoderTrace<float> attn_trace = forward(params, unbounded);
    const Mat<float> reduced = attn_reduce(attn_trace, fcfg.attn_reduce);
    const auto corners = attention_corners(reduced, fcfg.corner_k);
    emb.values.insert(emb.values.end(), corners.begin(), corners.end());
  }
  return emb;
}

EmbeddedDataset embed_dataset(const EncoderParams<float>& params, const LabeledDataset& data,
                              const Vocabulary& vocab, const FeatureConfig& fcfg) {
  fcfg.validate();
  const int dim = embedding_dim(fcfg, params.config.hidden);
  EmbeddedDataset out;
  out.X = Mat<float>(static_cast<int>(data.size()), dim);
  out.labels.assign(data.size(), 255);
  parallel_for(data.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const TweetEmbedding emb = embed_tweet(params, data.tweets[i].text, vocab, fcfg);
      if (emb.length() != dim) throw NumericError("embedding dimension drifted");
      std::copy(emb.values.begin(), emb.values.end(), out.X.row(static_cast<int>(i)));
      const int label = data.tweets[i].label;
      out.labels[i] = label == 0 ? 0 : label == 1 ? 1 : 255;
    }
  });
  return out;
}

}  // namespace atsn
