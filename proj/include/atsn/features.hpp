#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atsn/encoder.hpp"
#include "atsn/matrix.hpp"
#include "atsn/tokenizer.hpp"

namespace atsn {

// Which hidden states feed the pooled part of the embedding.
enum class HiddenMode {
  Last1,        // final layer only
  Last2Concat,  // last two layers, concatenated
  Last4Concat,  // last four layers, concatenated (default)
  Last4Sum,     // elementwise sum of the last four layers
};

const char* hidden_mode_name(HiddenMode mode);
HiddenMode hidden_mode_from_name(const std::string& name);

// How the per-layer, per-head attention matrices collapse into one matrix.
struct AttnReduceRule {
  enum class Kind { MeanHeadsLastLayer, SingleHead };
  Kind kind = Kind::MeanHeadsLastLayer;
  int layer = 0;
  int head = 0;
};

std::string attn_reduce_name(const AttnReduceRule& rule);
AttnReduceRule attn_reduce_from_name(const std::string& name);

struct FeatureConfig {
  HiddenMode hidden_mode = HiddenMode::Last4Concat;
  int corner_k = 16;  // even; the four corner submatrices are (k/2) x (k/2)
  AttnReduceRule attn_reduce;
  bool include_attention = true;
  int encode_len = 50;   // fixed-length encoding for the hidden-state branch
  int attn_cap = 128;    // length cap for the unbounded attention branch

  void validate() const;
};

// Fixed-length embedding of one tweet: pooled hidden features first, then
// the flattened attention corners.
struct TweetEmbedding {
  std::vector<float> values;
  int hidden_len = 0;

  int length() const { return static_cast<int>(values.size()); }
};

int hidden_feature_len(HiddenMode mode, int hidden_size);
int embedding_dim(const FeatureConfig& fcfg, int hidden_size);

// Mean over real tokens of the selected layers' activations (concatenated or
// summed). Padded positions never contribute.
std::vector<float> hidden_features(const EncoderTrace<float>& trace,
                                   const std::vector<std::uint8_t>& mask, HiddenMode mode);

// Collapses the trace's attention stack into a single n x n matrix.
Mat<float> attn_reduce(const EncoderTrace<float>& trace, const AttnReduceRule& rule);

// Row-major concatenation of the four (k/2) x (k/2) corner submatrices in
// top-left, top-right, bottom-left, bottom-right order. Matrices smaller
// than k x k are implicitly zero-padded on the bottom and right first, so
// short inputs keep all their attention mass.
std::vector<float> attention_corners(const Mat<float>& A, int k);

TweetEmbedding embed_tweet(const EncoderParams<float>& params, const std::string& text,
                           const Vocabulary& vocab, const FeatureConfig& fcfg);

// Embeds every tweet (parallel across tweets, output in dataset order) and
// returns the matrix plus the label bytes used by the embedding cache.
struct EmbeddedDataset {
  Mat<float> X;
  std::vector<std::uint8_t> labels;  // 0, 1, or 255 for unlabeled
};

EmbeddedDataset embed_dataset(const EncoderParams<float>& params, const LabeledDataset& data,
                              const Vocabulary& vocab, const FeatureConfig& fcfg);

}  // namespace atsn
