#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atsn/config.hpp"
#include "atsn/corpus.hpp"
#include "atsn/ensemble.hpp"

namespace atsn {

// Artifact layout inside the output directory. Stages communicate only
// through these files; any of them can be deleted and rebuilt bit-identically
// from the same config.
struct PipelinePaths {
  std::filesystem::path out;

  explicit PipelinePaths(const std::string& out_dir) : out(out_dir) {}

  std::filesystem::path dataset() const { return out / "dataset.tsv"; }
  std::filesystem::path vocab() const { return out / "vocab.tsv"; }
  std::filesystem::path pretrained() const { return out / "encoder_pretrained.atsn"; }
  std::filesystem::path finetuned() const { return out / "finetuned.atsn"; }
  std::filesystem::path embeddings() const { return out / "embeddings.atse"; }
  std::filesystem::path mlp_hidden() const { return out / "mlp_hidden.atsn"; }
  std::filesystem::path mlp_full() const { return out / "mlp_full.atsn"; }
  std::filesystem::path ensemble_file() const { return out / "ensemble.atsn"; }
  std::filesystem::path logreg() const { return out / "logreg.atsn"; }
  std::filesystem::path report() const { return out / "report.tsv"; }
  std::filesystem::path fingerprint_file() const { return out / "config.fingerprint"; }
  std::filesystem::path histogram() const { return out / "wordcount_hist.tsv"; }
  std::filesystem::path pretrain_log() const { return out / "pretrain.log"; }
  std::filesystem::path finetune_log() const { return out / "finetune.log"; }
  std::filesystem::path mlp_hidden_log() const { return out / "mlp_hidden.log"; }
  std::filesystem::path mlp_full_log() const { return out / "mlp_full.log"; }

  std::vector<std::filesystem::path> artifacts() const;
};

struct ReportRow {
  std::string model;
  double accuracy = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::uint64_t fingerprint = 0;
  double runtime_seconds = 0.0;  // printed, never written to the report file
  std::vector<std::string> computed_stages;
  std::vector<std::string> resumed_stages;
};

// Loads (or synthesizes) the dataset named by the config.
LabeledDataset obtain_dataset(const RunConfig& cfg);

// Deterministic held-out split; test gets round(fraction * n), at least 1.
void train_test_split(std::size_t n, double test_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train_idx, std::vector<std::size_t>& test_idx);

// The full experiment: dataset -> vocab -> pretrain -> fine-tune -> embed ->
// classifiers -> evaluation. Stages resume from their artifact when the
// config fingerprint matches; a mismatch invalidates everything.
Report run_pipeline(const RunConfig& cfg);

void write_report_file(const Report& report, const std::filesystem::path& path);

// Word-count histogram, buckets of width 5 from zero up to the largest count.
struct HistogramBucket {
  int lo = 0;
  std::size_t count = 0;
};
std::vector<HistogramBucket> word_count_histogram(const LabeledDataset& ds);

// Stand-alone stage commands; unlike the pipeline they always recompute.
std::vector<HistogramBucket> cmd_stats(const RunConfig& cfg);
void cmd_build_vocab(const RunConfig& cfg);
void cmd_pretrain(const RunConfig& cfg);
void cmd_finetune(const RunConfig& cfg);
void cmd_embed(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_train_ensemble(const RunConfig& cfg);

struct PredictResult {
  int label = 0;
  double probability = 0.0;
};

// Classifies one tweet with any saved model; vocab/encoder paths default to
// the pipeline artifacts in the output directory.
PredictResult cmd_predict(const RunConfig& cfg, const std::string& model_path,
                          const std::string& text, std::string vocab_path = "",
                          std::string encoder_path = "");

// Accuracy of a saved model over the whole configured dataset.
EvalResult cmd_evaluate(const RunConfig& cfg, const std::string& model_path,
                        std::string vocab_path = "", std::string encoder_path = "");

}  // namespace atsn
