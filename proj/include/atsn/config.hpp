#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atsn/classifier.hpp"
#include "atsn/encoder.hpp"
#include "atsn/features.hpp"

namespace atsn {

// Every knob of the pipeline as flat `key = value` entries. Unknown keys are
// rejected and ranges are validated at parse time. The canonical form (all
// keys, sorted, normalized values) plus the file-format versions feeds the
// config fingerprint that governs cache validity.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  int threads = 0;  // 0 = hardware default; never part of the fingerprint

  // data
  std::string data_source = "synthetic";  // synthetic | two-file | tsv
  std::string data_path;                  // tsv file
  std::string data_pos_path;              // two-file format
  std::string data_neg_path;
  int data_n = 10000;
  int data_vocab_size = 200;
  double data_test_fraction = 0.2;

  // tokenizer
  int vocab_max_size = 4096;
  int encode_max_len = 50;
  int encode_attn_cap = 128;

  // encoder
  int enc_layers = 4;
  int enc_heads = 4;
  int enc_hidden = 192;
  int enc_ff = 384;
  int enc_max_pos = 128;

  // masked-token pretraining
  double pretrain_mask_prob = 0.15;
  double pretrain_lr = 3e-4;
  int pretrain_batch = 32;
  int pretrain_epochs = 1;
  int pretrain_subsample = 0;  // 0 = whole training split

  // fine-tuning
  double finetune_lr = 1e-5;
  int finetune_batch = 128;
  int finetune_epochs = 2;
  int finetune_subsample = 0;
  double finetune_weight_decay = 0.01;
  bool finetune_update_encoder = true;

  // features
  std::string features_hidden_mode = "last4-concat";
  int features_corner_k = 16;
  std::string features_attn_reduce = "mean";
  bool features_include_attention = true;

  // classifier
  int mlp_width = 0;  // 0 = width rule
  double mlp_dropout = 0.9;
  double mlp_lr = 5e-5;
  int mlp_batch = 16384;
  int mlp_epochs = 15;
  double mlp_weight_decay = 0.0;

  // ensemble
  int ensemble_k = 5;

  // bag-of-words baseline
  double baseline_lr = 0.5;
  int baseline_epochs = 200;
  double baseline_l2 = 1e-4;

  // Applies one `key = value` assignment; throws UsageError for unknown keys
  // or out-of-range values.
  void set(const std::string& key, const std::string& value);

  // Cross-field checks that single assignments cannot see.
  void validate() const;

  // All keys in sorted order with normalized values, one per line.
  std::string canonical() const;

  // FNV-1a over the canonical text and the binary format versions.
  std::uint64_t fingerprint() const;

  FeatureConfig feature_config() const;
  EncoderConfig encoder_config(int vocab_size) const;
  TrainHyper mlp_hyper() const;
  FineTuneHyper finetune_hyper() const;
  MlmHyper pretrain_hyper() const;

  static const std::vector<std::string>& keys();
};

// Parses a `key = value` config file ('#' starts a comment) on top of cfg.
void apply_config_file(RunConfig& cfg, const std::string& path);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace atsn
