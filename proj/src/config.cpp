#include "atsn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "atsn/common.hpp"
#include "atsn/serialize.hpp"

namespace atsn {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

long long parse_int(const std::string& key, const std::string& value, long long lo, long long hi) {
  long long v = 0;
  try {
    std::size_t used = 0;
    v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw UsageError("config key " + key + " wants an integer, got '" + value + "'");
  }
  if (v < lo || v > hi) {
    throw UsageError("config key " + key + " = " + value + " is outside [" + std::to_string(lo) +
                     ", " + std::to_string(hi) + "]");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value, double lo, double hi,
                    bool open_low = false, bool open_high = false) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw UsageError("config key " + key + " wants a number, got '" + value + "'");
  }
  const bool low_ok = open_low ? v > lo : v >= lo;
  const bool high_ok = open_high ? v < hi : v <= hi;
  if (!low_ok || !high_ok) {
    throw UsageError("config key " + key + " = " + value + " is out of range");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config key " + key + " wants true/false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct KeyEntry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    const auto add = [&t](const char* key, std::function<void(RunConfig&, const std::string&)> set,
                          std::function<std::string(const RunConfig&)> get) {
      t.push_back({key, std::move(set), std::move(get)});
    };

    add("seed",
        [](RunConfig& c, const std::string& v) {
          c.seed = static_cast<std::uint64_t>(parse_int("seed", v, 0, INT64_MAX));
        },
        [](const RunConfig& c) { return std::to_string(c.seed); });
    add("out", [](RunConfig& c, const std::string& v) { c.out = v; },
        [](const RunConfig& c) { return c.out; });
    add("threads",
        [](RunConfig& c, const std::string& v) {
          c.threads = static_cast<int>(parse_int("threads", v, 0, 256));
        },
        [](const RunConfig& c) { return std::to_string(c.threads); });

    add("data.source",
        [](RunConfig& c, const std::string& v) {
          if (v != "synthetic" && v != "two-file" && v != "tsv") {
            throw UsageError("data.source must be synthetic, two-file or tsv");
          }
          c.data_source = v;
        },
        [](const RunConfig& c) { return c.data_source; });
    add("data.path", [](RunConfig& c, const std::string& v) { c.data_path = v; },
        [](const RunConfig& c) { return c.data_path; });
    add("data.pos_path", [](RunConfig& c, const std::string& v) { c.data_pos_path = v; },
        [](const RunConfig& c) { return c.data_pos_path; });
    add("data.neg_path", [](RunConfig& c, const std::string& v) { c.data_neg_path = v; },
        [](const RunConfig& c) { return c.data_neg_path; });
    add("data.n",
        [](RunConfig& c, const std::string& v) {
          c.data_n = static_cast<int>(parse_int("data.n", v, 2, 100000000));
        },
        [](const RunConfig& c) { return std::to_string(c.data_n); });
    add("data.vocab_size",
        [](RunConfig& c, const std::string& v) {
          c.data_vocab_size = static_cast<int>(parse_int("data.vocab_size", v, 20, 10000000));
        },
        [](const RunConfig& c) { return std::to_string(c.data_vocab_size); });
    add("data.test_fraction",
        [](RunConfig& c, const std::string& v) {
          c.data_test_fraction = parse_double("data.test_fraction", v, 0.0, 1.0, true, true);
        },
        [](const RunConfig& c) { return format_double(c.data_test_fraction); });

    add("vocab.max_size",
        [](RunConfig& c, const std::string& v) {
          c.vocab_max_size = static_cast<int>(parse_int("vocab.max_size", v, 4, 10000000));
        },
        [](const RunConfig& c) { return std::to_string(c.vocab_max_size); });
    add("encode.max_len",
        [](RunConfig& c, const std::string& v) {
          c.encode_max_len = static_cast<int>(parse_int("encode.max_len", v, 1, 4096));
        },
        [](const RunConfig& c) { return std::to_string(c.encode_max_len); });
    add("encode.attn_cap",
        [](RunConfig& c, const std::string& v) {
          c.encode_attn_cap = static_cast<int>(parse_int("encode.attn_cap", v, 16, 4096));
        },
        [](const RunConfig& c) { return std::to_string(c.encode_attn_cap); });

    add("enc.layers",
        [](RunConfig& c, const std::string& v) {
          c.enc_layers = static_cast<int>(parse_int("enc.layers", v, 1, 64));
        },
        [](const RunConfig& c) { return std::to_string(c.enc_layers); });
    add("enc.heads",
        [](RunConfig& c, const std::string& v) {
          c.enc_heads = static_cast<int>(parse_int("enc.heads", v, 1, 64));
        },
        [](const RunConfig& c) { return std::to_string(c.enc_heads); });
    add("enc.hidden",
        [](RunConfig& c, const std::string& v) {
          c.enc_hidden = static_cast<int>(parse_int("enc.hidden", v, 1, 8192));
        },
        [](const RunConfig& c) { return std::to_string(c.enc_hidden); });
    add("enc.ff",
        [](RunConfig& c, const std::string& v) {
          c.enc_ff = static_cast<int>(parse_int("enc.ff", v, 1, 32768));
        },
        [](const RunConfig& c) { return std::to_string(c.enc_ff); });
    add("enc.max_pos",
        [](RunConfig& c, const std::string& v) {
          c.enc_max_pos = static_cast<int>(parse_int("enc.max_pos", v, 1, 4096));
        },
        [](const RunConfig& c) { return std::to_string(c.enc_max_pos); });

    add("pretrain.mask_prob",
        [](RunConfig& c, const std::string& v) {
          c.pretrain_mask_prob = parse_double("pretrain.mask_prob", v, 0.0, 1.0);
        },
        [](const RunConfig& c) { return format_double(c.pretrain_mask_prob); });
    add("pretrain.lr",
        [](RunConfig& c, const std::string& v) {
          c.pretrain_lr = parse_double("pretrain.lr", v, 0.0, 1.0, true);
        },
        [](const RunConfig& c) { return format_double(c.pretrain_lr); });
    add("pretrain.batch",
        [](RunConfig& c, const std::string& v) {
          c.pretrain_batch = static_cast<int>(parse_int("pretrain.batch", v, 1, 1 << 20));
        },
        [](const RunConfig& c) { return std::to_string(c.pretrain_batch); });
    add("pretrain.epochs",
        [](RunConfig& c, const std::string& v) {
          c.pretrain_epochs = static_cast<int>(parse_int("pretrain.epochs", v, 0, 10000));
        },
        [](const RunConfig& c) { return std::to_string(c.pretrain_epochs); });
    add("pretrain.subsample",
        [](RunConfig& c, const std::string& v) {
          c.pretrain_subsample = static_cast<int>(parse_int("pretrain.subsample", v, 0, 100000000));
        },
        [](const RunConfig& c) { return std::to_string(c.pretrain_subsample); });

    add("finetune.lr",
        [](RunConfig& c, const std::string& v) {
          c.finetune_lr = parse_double("finetune.lr", v, 0.0, 1.0, true);
        },
        [](const RunConfig& c) { return format_double(c.finetune_lr); });
    add("finetune.batch",
        [](RunConfig& c, const std::string& v) {
          c.finetune_batch = static_cast<int>(parse_int("finetune.batch", v, 1, 1 << 20));
        },
        [](const RunConfig& c) { return std::to_string(c.finetune_batch); });
    add("finetune.epochs",
        [](RunConfig& c, const std::string& v) {
          c.finetune_epochs = static_cast<int>(parse_int("finetune.epochs", v, 0, 10000));
        },
        [](const RunConfig& c) { return std::to_string(c.finetune_epochs); });
    add("finetune.subsample",
        [](RunConfig& c, const std::string& v) {
          c.finetune_subsample = static_cast<int>(parse_int("finetune.subsample", v, 0, 100000000));
        },
        [](const RunConfig& c) { return std::to_string(c.finetune_subsample); });
    add("finetune.weight_decay",
        [](RunConfig& c, const std::string& v) {
          c.finetune_weight_decay = parse_double("finetune.weight_decay", v, 0.0, 10.0);
        },
        [](const RunConfig& c) { return format_double(c.finetune_weight_decay); });
    add("finetune.update_encoder",
        [](RunConfig& c, const std::string& v) {
          c.finetune_update_encoder = parse_bool("finetune.update_encoder", v);
        },
        [](const RunConfig& c) { return c.finetune_update_encoder ? "true" : "false"; });

    add("features.hidden_mode",
        [](RunConfig& c, const std::string& v) {
          hidden_mode_from_name(v);  // validates
          c.features_hidden_mode = v;
        },
        [](const RunConfig& c) { return c.features_hidden_mode; });
    add("features.corner_k",
        [](RunConfig& c, const std::string& v) {
          const int k = static_cast<int>(parse_int("features.corner_k", v, 2, 512));
          if (k % 2 != 0) throw UsageError("features.corner_k must be even");
          c.features_corner_k = k;
        },
        [](const RunConfig& c) { return std::to_string(c.features_corner_k); });
    add("features.attn_reduce",
        [](RunConfig& c, const std::string& v) {
          attn_reduce_from_name(v);  // validates
          c.features_attn_reduce = v;
        },
        [](const RunConfig& c) { return c.features_attn_reduce; });
    add("features.include_attention",
        [](RunConfig& c, const std::string& v) {
          c.features_include_attention = parse_bool("features.include_attention", v);
        },
        [](const RunConfig& c) { return c.features_include_attention ? "true" : "false"; });

    add("mlp.width",
        [](RunConfig& c, const std::string& v) {
          c.mlp_width = static_cast<int>(parse_int("mlp.width", v, 0, 100000));
        },
        [](const RunConfig& c) { return std::to_string(c.mlp_width); });
    add("mlp.dropout",
        [](RunConfig& c, const std::string& v) {
          c.mlp_dropout = parse_double("mlp.dropout", v, 0.0, 1.0, false, true);
        },
        [](const RunConfig& c) { return format_double(c.mlp_dropout); });
    add("mlp.lr",
        [](RunConfig& c, const std::string& v) {
          c.mlp_lr = parse_double("mlp.lr", v, 0.0, 1.0, true);
        },
        [](const RunConfig& c) { return format_double(c.mlp_lr); });
    add("mlp.batch",
        [](RunConfig& c, const std::string& v) {
          c.mlp_batch = static_cast<int>(parse_int("mlp.batch", v, 1, 1 << 24));
        },
        [](const RunConfig& c) { return std::to_string(c.mlp_batch); });
    add("mlp.epochs",
        [](RunConfig& c, const std::string& v) {
          c.mlp_epochs = static_cast<int>(parse_int("mlp.epochs", v, 1, 10000));
        },
        [](const RunConfig& c) { return std::to_string(c.mlp_epochs); });
    add("mlp.weight_decay",
        [](RunConfig& c, const std::string& v) {
          c.mlp_weight_decay = parse_double("mlp.weight_decay", v, 0.0, 10.0);
        },
        [](const RunConfig& c) { return format_double(c.mlp_weight_decay); });

    add("ensemble.k",
        [](RunConfig& c, const std::string& v) {
          c.ensemble_k = static_cast<int>(parse_int("ensemble.k", v, 2, 255));
        },
        [](const RunConfig& c) { return std::to_string(c.ensemble_k); });

    add("baseline.lr",
        [](RunConfig& c, const std::string& v) {
          c.baseline_lr = parse_double("baseline.lr", v, 0.0, 100.0, true);
        },
        [](const RunConfig& c) { return format_double(c.baseline_lr); });
    add("baseline.epochs",
        [](RunConfig& c, const std::string& v) {
          c.baseline_epochs = static_cast<int>(parse_int("baseline.epochs", v, 1, 1000000));
        },
        [](const RunConfig& c) { return std::to_string(c.baseline_epochs); });
    add("baseline.l2",
        [](RunConfig& c, const std::string& v) {
          c.baseline_l2 = parse_double("baseline.l2", v, 0.0, 1000.0);
        },
        [](const RunConfig& c) { return format_double(c.baseline_l2); });

    return t;
  }();
  return table;
}

const KeyEntry& find_key(const std::string& key) {
  for (const auto& entry : registry()) {
    if (key == entry.key) return entry;
  }
  throw UsageError("unknown config key: " + key);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  find_key(key).set(*this, value);
}

void RunConfig::validate() const {
  if (enc_hidden % enc_heads != 0) {
    throw UsageError("enc.hidden must be divisible by enc.heads");
  }
  if (enc_max_pos < encode_attn_cap) {
    throw UsageError("enc.max_pos must be >= encode.attn_cap");
  }
  if (enc_max_pos < encode_max_len) {
    throw UsageError("enc.max_pos must be >= encode.max_len");
  }
  const HiddenMode mode = hidden_mode_from_name(features_hidden_mode);
  const int need = (mode == HiddenMode::Last4Concat || mode == HiddenMode::Last4Sum) ? 4
                   : mode == HiddenMode::Last2Concat                                 ? 2
                                                                                     : 1;
  if (enc_layers < need) {
    throw UsageError("features.hidden_mode " + features_hidden_mode + " needs enc.layers >= " +
                     std::to_string(need));
  }
  if (data_source == "tsv" && data_path.empty()) {
    throw UsageError("data.source = tsv needs data.path");
  }
  if (data_source == "two-file" && (data_pos_path.empty() || data_neg_path.empty())) {
    throw UsageError("data.source = two-file needs data.pos_path and data.neg_path");
  }
  feature_config().validate();
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  for (const auto& entry : registry()) kv[entry.key] = entry.get(*this);
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t RunConfig::fingerprint() const {
  // threads and out are execution details; results do not depend on them.
  std::map<std::string, std::string> kv;
  for (const auto& entry : registry()) {
    if (std::string(entry.key) == "threads" || std::string(entry.key) == "out") continue;
    kv[entry.key] = entry.get(*this);
  }
  std::string text;
  for (const auto& [key, value] : kv) {
    text += key;
    text += '=';
    text += value;
    text += '\n';
  }
  text += "param_format=" + std::to_string(kParamVersion) + "\n";
  text += "cache_format=" + std::to_string(kCacheVersion) + "\n";
  return fnv1a64(text);
}

FeatureConfig RunConfig::feature_config() const {
  FeatureConfig fcfg;
  fcfg.hidden_mode = hidden_mode_from_name(features_hidden_mode);
  fcfg.corner_k = features_corner_k;
  fcfg.attn_reduce = attn_reduce_from_name(features_attn_reduce);
  fcfg.include_attention = features_include_attention;
  fcfg.encode_len = encode_max_len;
  fcfg.attn_cap = encode_attn_cap;
  return fcfg;
}

EncoderConfig RunConfig::encoder_config(int vocab_size) const {
  EncoderConfig ec;
  ec.layers = enc_layers;
  ec.heads = enc_heads;
  ec.hidden = enc_hidden;
  ec.ff = enc_ff;
  ec.vocab = vocab_size;
  ec.max_pos = enc_max_pos;
  return ec;
}

TrainHyper RunConfig::mlp_hyper() const {
  TrainHyper h;
  h.lr = mlp_lr;
  h.batch = mlp_batch;
  h.epochs = mlp_epochs;
  h.weight_decay = mlp_weight_decay;
  h.seed = seed;
  return h;
}

FineTuneHyper RunConfig::finetune_hyper() const {
  FineTuneHyper h;
  h.lr = finetune_lr;
  h.batch = finetune_batch;
  h.epochs = finetune_epochs;
  h.weight_decay = finetune_weight_decay;
  h.update_encoder = finetune_update_encoder;
  h.seed = seed;
  return h;
}

MlmHyper RunConfig::pretrain_hyper() const {
  MlmHyper h;
  h.mask_prob = pretrain_mask_prob;
  h.lr = pretrain_lr;
  h.batch = pretrain_batch;
  h.epochs = pretrain_epochs;
  h.seed = seed;
  return h;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : registry()) out.push_back(entry.key);
    return out;
  }();
  return names;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + " in " + path +
                       " is not `key = value`");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace atsn
