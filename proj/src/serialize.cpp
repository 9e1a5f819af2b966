#include "atsn/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "atsn/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");
static_assert(sizeof(float) == 4, "float32 storage required");

namespace atsn {

namespace {

constexpr char kTagEncoder[4] = {'E', 'N', 'C', ' '};
constexpr char kTagHead[4] = {'H', 'E', 'D', ' '};
constexpr char kTagMlp[4] = {'M', 'L', 'P', ' '};
constexpr char kTagEnsemble[4] = {'E', 'N', 'S', ' '};
constexpr char kTagLogReg[4] = {'L', 'R', 'G', ' '};

void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw DataError("write failed");
}

void read_bytes(std::istream& in, void* data, std::size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw DataError(std::string("unexpected end of file while reading ") + what);
  }
}

template <class T>
void write_pod(std::ostream& out, T value) {
  write_bytes(out, &value, sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const char* what) {
  T value;
  read_bytes(in, &value, sizeof(T), what);
  return value;
}

void write_tag(std::ostream& out, const char tag[4]) { write_bytes(out, tag, 4); }

bool tag_is(const char a[4], const char b[4]) { return std::memcmp(a, b, 4) == 0; }

std::string printable_bytes(const char* bytes, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char c = static_cast<unsigned char>(bytes[i]);
    if (c >= 0x20 && c < 0x7f) {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\x%02x", c);
      out += buf;
    }
  }
  return out;
}

void write_header(std::ostream& out) {
  write_bytes(out, kParamMagic, 4);
  write_pod<std::uint32_t>(out, kParamVersion);
}

void read_header(std::istream& in, const std::string& path) {
  char magic[4];
  read_bytes(in, magic, 4, "file magic");
  if (std::memcmp(magic, kParamMagic, 4) != 0) {
    throw DataError("bad magic in " + path + ": found \"" + printable_bytes(magic, 4) +
                    "\", expected \"ATSN\"");
  }
  const auto version = read_pod<std::uint32_t>(in, "format version");
  if (version != kParamVersion) {
    throw DataError("unsupported format version " + std::to_string(version) + " in " + path +
                    " (this build reads version " + std::to_string(kParamVersion) + ")");
  }
}

void write_tensors(std::ostream& out, const std::vector<TensorRef<float>>& tensors) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_pod<std::uint32_t>(out, 2);  // rank
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.mat->rows));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.mat->cols));
    write_bytes(out, t.mat->a.data(), t.mat->a.size() * sizeof(float));
  }
}

void read_tensors(std::istream& in, const std::vector<TensorRef<float>>& tensors,
                  const std::string& path) {
  const auto count = read_pod<std::uint32_t>(in, "tensor count");
  if (count != tensors.size()) {
    throw DataError("tensor count mismatch in " + path + ": file has " + std::to_string(count) +
                    ", expected " + std::to_string(tensors.size()));
  }
  for (const auto& t : tensors) {
    const auto rank = read_pod<std::uint32_t>(in, "tensor rank");
    if (rank != 2) throw DataError("unsupported tensor rank in " + path);
    const auto rows = read_pod<std::uint32_t>(in, "tensor rows");
    const auto cols = read_pod<std::uint32_t>(in, "tensor cols");
    if (rows != static_cast<std::uint32_t>(t.mat->rows) ||
        cols != static_cast<std::uint32_t>(t.mat->cols)) {
      throw DataError("tensor \"" + t.name + "\" in " + path + " has shape " + std::to_string(rows) +
                      "x" + std::to_string(cols) + ", expected " + std::to_string(t.mat->rows) + "x" +
                      std::to_string(t.mat->cols));
    }
    read_bytes(in, t.mat->a.data(), t.mat->a.size() * sizeof(float), "tensor data");
  }
}

struct FeatureConfigBlock {
  std::uint8_t hidden_mode;
  std::uint8_t include_attention;
  std::uint8_t reduce_kind;
  std::uint8_t reserved;
  std::uint32_t reduce_layer;
  std::uint32_t reduce_head;
  std::uint32_t corner_k;
  std::uint32_t encode_len;
  std::uint32_t attn_cap;
};

FeatureConfigBlock pack_feature_config(const FeatureConfig& fcfg) {
  FeatureConfigBlock block{};
  block.hidden_mode = static_cast<std::uint8_t>(fcfg.hidden_mode);
  block.include_attention = fcfg.include_attention ? 1 : 0;
  block.reduce_kind = fcfg.attn_reduce.kind == AttnReduceRule::Kind::SingleHead ? 1 : 0;
  block.reduce_layer = static_cast<std::uint32_t>(fcfg.attn_reduce.layer);
  block.reduce_head = static_cast<std::uint32_t>(fcfg.attn_reduce.head);
  block.corner_k = static_cast<std::uint32_t>(fcfg.corner_k);
  block.encode_len = static_cast<std::uint32_t>(fcfg.encode_len);
  block.attn_cap = static_cast<std::uint32_t>(fcfg.attn_cap);
  return block;
}

FeatureConfig unpack_feature_config(const FeatureConfigBlock& block) {
  FeatureConfig fcfg;
  if (block.hidden_mode > 3) throw DataError("bad hidden mode in model file");
  fcfg.hidden_mode = static_cast<HiddenMode>(block.hidden_mode);
  fcfg.include_attention = block.include_attention != 0;
  fcfg.attn_reduce.kind = block.reduce_kind == 1 ? AttnReduceRule::Kind::SingleHead
                                                 : AttnReduceRule::Kind::MeanHeadsLastLayer;
  fcfg.attn_reduce.layer = static_cast<int>(block.reduce_layer);
  fcfg.attn_reduce.head = static_cast<int>(block.reduce_head);
  fcfg.corner_k = static_cast<int>(block.corner_k);
  fcfg.encode_len = static_cast<int>(block.encode_len);
  fcfg.attn_cap = static_cast<int>(block.attn_cap);
  return fcfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

void write_encoder_section(std::ostream& out, EncoderParams<float>& params) {
  write_tag(out, kTagEncoder);
  write_pod<std::uint32_t>(out, 6 * sizeof(std::uint32_t));
  const auto& c = params.config;
  for (int v : {c.layers, c.heads, c.hidden, c.ff, c.vocab, c.max_pos}) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  write_tensors(out, params.tensors());
}

EncoderParams<float> read_encoder_section(std::istream& in, const std::string& path) {
  const auto config_size = read_pod<std::uint32_t>(in, "encoder config size");
  if (config_size != 6 * sizeof(std::uint32_t)) throw DataError("bad encoder config block in " + path);
  EncoderConfig c;
  c.layers = static_cast<int>(read_pod<std::uint32_t>(in, "layers"));
  c.heads = static_cast<int>(read_pod<std::uint32_t>(in, "heads"));
  c.hidden = static_cast<int>(read_pod<std::uint32_t>(in, "hidden"));
  c.ff = static_cast<int>(read_pod<std::uint32_t>(in, "ff"));
  c.vocab = static_cast<int>(read_pod<std::uint32_t>(in, "vocab"));
  c.max_pos = static_cast<int>(read_pod<std::uint32_t>(in, "max_pos"));
  c.validate();
  EncoderParams<float> params = zero_params<float>(c);
  read_tensors(in, params.tensors(), path);
  return params;
}

void write_mlp_section(std::ostream& out, MlpParams<float>& params, const FeatureConfig& fcfg) {
  write_tag(out, kTagMlp);
  const FeatureConfigBlock block = pack_feature_config(fcfg);
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(2 * sizeof(std::uint32_t) + sizeof(float) +
                                                      sizeof(FeatureConfigBlock)));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.d_in));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.width));
  write_pod<float>(out, params.dropout_p);
  write_bytes(out, &block, sizeof(block));
  write_tensors(out, params.tensors());
}

void read_mlp_section(std::istream& in, const std::string& path, MlpParams<float>& params,
                      FeatureConfig& fcfg) {
  const auto config_size = read_pod<std::uint32_t>(in, "mlp config size");
  if (config_size != 2 * sizeof(std::uint32_t) + sizeof(float) + sizeof(FeatureConfigBlock)) {
    throw DataError("bad mlp config block in " + path);
  }
  const int d_in = static_cast<int>(read_pod<std::uint32_t>(in, "d_in"));
  const int width = static_cast<int>(read_pod<std::uint32_t>(in, "width"));
  const float dropout_p = read_pod<float>(in, "dropout");
  FeatureConfigBlock block;
  read_bytes(in, &block, sizeof(block), "feature config");
  fcfg = unpack_feature_config(block);
  params = init_mlp<float>(d_in, width, 0.0, 0);
  params.dropout_p = dropout_p;
  read_tensors(in, params.tensors(), path);
}

void expect_tag(std::istream& in, const char expected[4], const std::string& path) {
  char tag[4];
  read_bytes(in, tag, 4, "section tag");
  if (!tag_is(tag, expected)) {
    throw DataError("unexpected section \"" + printable_bytes(tag, 4) + "\" in " + path +
                    ", expected \"" + printable_bytes(expected, 4) + "\"");
  }
}

}  // namespace

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Encoder: return "encoder";
    case ModelKind::Builtin: return "builtin";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Ensemble: return "ensemble";
    case ModelKind::LogReg: return "logreg";
  }
  return "?";
}

ModelKind peek_model_kind(const std::string& path) {
  auto in = open_in(path);
  read_header(in, path);
  char tag[4];
  read_bytes(in, tag, 4, "section tag");
  if (tag_is(tag, kTagMlp)) return ModelKind::Mlp;
  if (tag_is(tag, kTagEnsemble)) return ModelKind::Ensemble;
  if (tag_is(tag, kTagLogReg)) return ModelKind::LogReg;
  if (tag_is(tag, kTagEncoder)) {
    // Encoder-only file or fine-tuned bundle; skip the section and look for
    // a head.
    try {
      read_encoder_section(in, path);
    } catch (const DataError&) {
      throw;
    }
    char next[4];
    in.read(next, 4);
    if (in.gcount() == 4 && tag_is(next, kTagHead)) return ModelKind::Builtin;
    return ModelKind::Encoder;
  }
  throw DataError("unknown section \"" + printable_bytes(tag, 4) + "\" in " + path);
}

void save_encoder_file(const std::string& path, EncoderParams<float>& params) {
  auto out = open_out(path);
  write_header(out);
  write_encoder_section(out, params);
}

EncoderParams<float> load_encoder_file(const std::string& path) {
  auto in = open_in(path);
  read_header(in, path);
  expect_tag(in, kTagEncoder, path);
  return read_encoder_section(in, path);
}

void save_builtin_file(const std::string& path, EncoderParams<float>& enc, HeadParams<float>& head) {
  auto out = open_out(path);
  write_header(out);
  write_encoder_section(out, enc);
  write_tag(out, kTagHead);
  write_pod<std::uint32_t>(out, sizeof(std::uint32_t));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(enc.config.hidden));
  write_tensors(out, head.tensors());
}

void load_builtin_file(const std::string& path, EncoderParams<float>& enc, HeadParams<float>& head) {
  auto in = open_in(path);
  read_header(in, path);
  expect_tag(in, kTagEncoder, path);
  enc = read_encoder_section(in, path);
  expect_tag(in, kTagHead, path);
  const auto config_size = read_pod<std::uint32_t>(in, "head config size");
  if (config_size != sizeof(std::uint32_t)) throw DataError("bad head config block in " + path);
  const int hidden = static_cast<int>(read_pod<std::uint32_t>(in, "head hidden"));
  if (hidden != enc.config.hidden) throw DataError("head width mismatch in " + path);
  head.w = Mat<float>(1, hidden);
  head.b = Mat<float>(1, 1);
  read_tensors(in, head.tensors(), path);
}

void save_mlp_file(const std::string& path, MlpParams<float>& params, const FeatureConfig& fcfg) {
  auto out = open_out(path);
  write_header(out);
  write_mlp_section(out, params, fcfg);
}

void load_mlp_file(const std::string& path, MlpParams<float>& params, FeatureConfig& fcfg) {
  auto in = open_in(path);
  read_header(in, path);
  expect_tag(in, kTagMlp, path);
  read_mlp_section(in, path, params, fcfg);
}

void save_ensemble_file(const std::string& path, Ensemble& ens, const FeatureConfig& fcfg) {
  if (ens.folds.k > 255) throw DataError("fold ids must fit in one byte");
  auto out = open_out(path);
  write_header(out);
  write_tag(out, kTagEnsemble);
  const std::uint64_t count = ens.folds.fold_of.size();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(2 * sizeof(std::uint32_t) +
                                                           sizeof(std::uint64_t) * 2 + count));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ens.models.size()));
  write_pod<std::uint64_t>(out, ens.feature_fingerprint);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ens.folds.k));
  write_pod<std::uint64_t>(out, count);
  for (int fold : ens.folds.fold_of) write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(fold));
  for (auto& model : ens.models) write_mlp_section(out, model, fcfg);
}

void load_ensemble_file(const std::string& path, Ensemble& ens, FeatureConfig& fcfg) {
  auto in = open_in(path);
  read_header(in, path);
  expect_tag(in, kTagEnsemble, path);
  read_pod<std::uint32_t>(in, "ensemble config size");
  const auto k_models = read_pod<std::uint32_t>(in, "model count");
  ens.feature_fingerprint = read_pod<std::uint64_t>(in, "feature fingerprint");
  ens.folds.k = static_cast<int>(read_pod<std::uint32_t>(in, "fold count"));
  const auto count = read_pod<std::uint64_t>(in, "fold assignment size");
  ens.folds.fold_of.resize(count);
  for (auto& fold : ens.folds.fold_of) fold = read_pod<std::uint8_t>(in, "fold id");
  ens.models.clear();
  for (std::uint32_t i = 0; i < k_models; ++i) {
    expect_tag(in, kTagMlp, path);
    MlpParams<float> model;
    read_mlp_section(in, path, model, fcfg);
    ens.models.push_back(std::move(model));
  }
}

void save_logreg_file(const std::string& path, const LogRegParams<float>& params) {
  auto out = open_out(path);
  write_header(out);
  write_tag(out, kTagLogReg);
  write_pod<std::uint32_t>(out, sizeof(std::uint32_t));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.w.size()));
  Mat<float> w(1, static_cast<int>(params.w.size()));
  std::copy(params.w.begin(), params.w.end(), w.a.begin());
  Mat<float> b(1, 1);
  b.at(0, 0) = params.b;
  std::vector<TensorRef<float>> tensors = {{"w", &w}, {"b", &b}};
  write_tensors(out, tensors);
}

LogRegParams<float> load_logreg_file(const std::string& path) {
  auto in = open_in(path);
  read_header(in, path);
  expect_tag(in, kTagLogReg, path);
  const auto config_size = read_pod<std::uint32_t>(in, "logreg config size");
  if (config_size != sizeof(std::uint32_t)) throw DataError("bad logreg config block in " + path);
  const auto vocab_size = read_pod<std::uint32_t>(in, "vocab size");
  Mat<float> w(1, static_cast<int>(vocab_size));
  Mat<float> b(1, 1);
  std::vector<TensorRef<float>> tensors = {{"w", &w}, {"b", &b}};
  read_tensors(in, tensors, path);
  LogRegParams<float> params;
  params.w.assign(w.a.begin(), w.a.end());
  params.b = b.at(0, 0);
  return params;
}

void save_embedding_cache(const std::string& path, const Mat<float>& X,
                          const std::vector<std::uint8_t>& labels) {
  if (labels.size() != static_cast<std::size_t>(X.rows)) {
    throw DataError("embedding cache labels do not match row count");
  }
  auto out = open_out(path);
  write_bytes(out, kCacheMagic, 4);
  write_pod<std::uint32_t>(out, kCacheVersion);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(X.rows));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(X.cols));
  write_bytes(out, X.a.data(), X.a.size() * sizeof(float));
  write_bytes(out, labels.data(), labels.size());
}

void load_embedding_cache(const std::string& path, Mat<float>& X,
                          std::vector<std::uint8_t>& labels) {
  auto in = open_in(path);
  char magic[4];
  read_bytes(in, magic, 4, "cache magic");
  if (std::memcmp(magic, kCacheMagic, 4) != 0) {
    throw DataError("bad magic in " + path + ": found \"" + printable_bytes(magic, 4) +
                    "\", expected \"ATSE\"");
  }
  const auto version = read_pod<std::uint32_t>(in, "cache version");
  if (version != kCacheVersion) {
    throw DataError("unsupported cache version " + std::to_string(version) + " in " + path);
  }
  const auto count = read_pod<std::uint64_t>(in, "cache count");
  const auto dim = read_pod<std::uint32_t>(in, "cache dim");
  X = Mat<float>(static_cast<int>(count), static_cast<int>(dim));
  read_bytes(in, X.a.data(), X.a.size() * sizeof(float), "cache values");
  labels.resize(count);
  read_bytes(in, labels.data(), labels.size(), "cache labels");
}

void save_train_log(const std::string& path, const TrainLog& log) {
  auto out = open_out(path);
  char buf[128];
  for (const auto& e : log.epochs) {
    if (e.val_acc >= 0.0) {
      std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\n", e.epoch, e.loss, e.train_acc,
                    e.val_acc);
    } else {
      std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t-\n", e.epoch, e.loss, e.train_acc);
    }
    out << buf;
  }
}

}  // namespace atsn
