#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atsn/baseline.hpp"
#include "atsn/classifier.hpp"
#include "atsn/encoder.hpp"
#include "atsn/ensemble.hpp"
#include "atsn/features.hpp"
#include "atsn/matrix.hpp"

namespace atsn {

// Parameter container: magic "ATSN", u32 format version, then one or more
// sections. Each section is a 4-byte tag, a u32-sized config block, and a
// tensor list (u32 count; per tensor u32 rank, u32 dims..., row-major
// float32 little-endian data). Round-trips are bit-exact.
inline constexpr char kParamMagic[4] = {'A', 'T', 'S', 'N'};
inline constexpr std::uint32_t kParamVersion = 1;

// Embedding cache: magic "ATSE", u32 version, u64 count, u32 dim,
// count x dim float32 little-endian values, then count label bytes
// (0/1/255 = unlabeled).
inline constexpr char kCacheMagic[4] = {'A', 'T', 'S', 'E'};
inline constexpr std::uint32_t kCacheVersion = 1;

enum class ModelKind { Encoder, Builtin, Mlp, Ensemble, LogReg };

const char* model_kind_name(ModelKind kind);

// Reads magic, version and the first section tag; throws DataError with the
// bytes found when the file is not a valid container.
ModelKind peek_model_kind(const std::string& path);

void save_encoder_file(const std::string& path, EncoderParams<float>& params);
EncoderParams<float> load_encoder_file(const std::string& path);

// Fine-tuned bundle: encoder section plus built-in head section.
void save_builtin_file(const std::string& path, EncoderParams<float>& enc, HeadParams<float>& head);
void load_builtin_file(const std::string& path, EncoderParams<float>& enc, HeadParams<float>& head);

void save_mlp_file(const std::string& path, MlpParams<float>& params, const FeatureConfig& fcfg);
void load_mlp_file(const std::string& path, MlpParams<float>& params, FeatureConfig& fcfg);

void save_ensemble_file(const std::string& path, Ensemble& ens, const FeatureConfig& fcfg);
void load_ensemble_file(const std::string& path, Ensemble& ens, FeatureConfig& fcfg);

void save_logreg_file(const std::string& path, const LogRegParams<float>& params);
LogRegParams<float> load_logreg_file(const std::string& path);

void save_embedding_cache(const std::string& path, const Mat<float>& X,
                          const std::vector<std::uint8_t>& labels);
void load_embedding_cache(const std::string& path, Mat<float>& X, std::vector<std::uint8_t>& labels);

// Training-log sidecar: `epoch<TAB>loss<TAB>train_acc<TAB>val_acc` lines.
void save_train_log(const std::string& path, const TrainLog& log);

}  // namespace atsn
