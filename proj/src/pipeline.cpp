#include "atsn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "atsn/baseline.hpp"
#include "atsn/common.hpp"
#include "atsn/features.hpp"
#include "atsn/rng.hpp"
#include "atsn/serialize.hpp"

namespace fs = std::filesystem;

namespace atsn {

namespace {

constexpr const char* kRowBuiltin = "builtin-head";
constexpr const char* kRowMlpHidden = "mlp-hidden";
constexpr const char* kRowMlpFull = "mlp-hidden-attn";
constexpr const char* kRowEnsemble = "ensemble-hidden-attn";
constexpr const char* kRowBaseline = "bow-logreg";

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

void log_stage(const std::string& stage, const std::string& what) {
  std::fprintf(stderr, "[pipeline] %-12s %s\n", stage.c_str(), what.c_str());
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  LabeledDataset out;
  out.source = ds.source;
  out.tweets.reserve(idx.size());
  for (auto i : idx) out.tweets.push_back(ds.tweets[i]);
  return out;
}

// First `take` of a seeded shuffle; 0 or oversize keeps everything.
std::vector<std::size_t> subsample(const std::vector<std::size_t>& idx, int take,
                                   std::uint64_t seed, std::uint64_t salt) {
  if (take <= 0 || static_cast<std::size_t>(take) >= idx.size()) return idx;
  std::vector<std::size_t> shuffled = idx;
  Rng rng(derive_seed(seed, SeedStream::Subsample, salt));
  rng.shuffle(shuffled);
  shuffled.resize(static_cast<std::size_t>(take));
  return shuffled;
}

void write_mlm_log(const fs::path& path, const MlmLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write log: " + path.string());
  char buf[64];
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\n", e, log.epoch_loss[e]);
    out << buf;
  }
}

std::vector<int> labels_to_int(const std::vector<std::uint8_t>& labels) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw DataError("embedding cache has unlabeled rows; cannot train");
    y[i] = labels[i];
  }
  return y;
}

struct SplitEmbeddings {
  Mat<float> x_train, x_test;
  std::vector<int> y_train, y_test;
};

SplitEmbeddings slice_embeddings(const Mat<float>& X, const std::vector<int>& y,
                                 const std::vector<std::size_t>& train_idx,
                                 const std::vector<std::size_t>& test_idx, int dim) {
  SplitEmbeddings s;
  s.x_train = Mat<float>(static_cast<int>(train_idx.size()), dim);
  s.x_test = Mat<float>(static_cast<int>(test_idx.size()), dim);
  s.y_train.resize(train_idx.size());
  s.y_test.resize(test_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    std::copy(X.row(static_cast<int>(train_idx[i])), X.row(static_cast<int>(train_idx[i])) + dim,
              s.x_train.row(static_cast<int>(i)));
    s.y_train[i] = y[train_idx[i]];
  }
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    std::copy(X.row(static_cast<int>(test_idx[i])), X.row(static_cast<int>(test_idx[i])) + dim,
              s.x_test.row(static_cast<int>(i)));
    s.y_test[i] = y[test_idx[i]];
  }
  return s;
}

std::uint64_t feature_fingerprint(const FeatureConfig& fcfg) {
  std::string text = std::string(hidden_mode_name(fcfg.hidden_mode)) + "|" +
                     std::to_string(fcfg.corner_k) + "|" + attn_reduce_name(fcfg.attn_reduce) + "|" +
                     (fcfg.include_attention ? "attn" : "noattn") + "|" +
                     std::to_string(fcfg.encode_len) + "|" + std::to_string(fcfg.attn_cap);
  return fnv1a64(text);
}

}  // namespace

std::vector<fs::path> PipelinePaths::artifacts() const {
  return {dataset(),   vocab(),      pretrained(),    finetuned(),      embeddings(),
          mlp_hidden(), mlp_full(),  ensemble_file(), logreg(),         report(),
          pretrain_log(), finetune_log(), mlp_hidden_log(), mlp_full_log()};
}

LabeledDataset obtain_dataset(const RunConfig& cfg) {
  if (cfg.data_source == "synthetic") {
    return generate_synthetic(cfg.data_n, cfg.data_vocab_size, cfg.seed);
  }
  if (cfg.data_source == "two-file") {
    return load_dataset_two_file(cfg.data_pos_path, cfg.data_neg_path);
  }
  return load_dataset_tsv(cfg.data_path);
}

void train_test_split(std::size_t n, double test_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train_idx, std::vector<std::size_t>& test_idx) {
  if (n < 2) throw DataError("dataset too small to split");
  auto idx = shuffled_indices(n, derive_seed(seed, SeedStream::TestSplit));
  std::size_t n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(n) + 0.5);
  n_test = std::min(std::max<std::size_t>(n_test, 1), n - 1);
  test_idx.assign(idx.begin(), idx.begin() + n_test);
  train_idx.assign(idx.begin() + n_test, idx.end());
}

std::vector<HistogramBucket> word_count_histogram(const LabeledDataset& ds) {
  if (ds.tweets.empty()) throw DataError("cannot build a histogram from an empty dataset");
  int max_count = 0;
  std::vector<int> counts;
  counts.reserve(ds.size());
  for (const auto& tweet : ds.tweets) {
    const int words = static_cast<int>(tokenize(tweet.text).size());
    counts.push_back(words);
    max_count = std::max(max_count, words);
  }
  const int cap = std::max(5, ((max_count / 5) + 1) * 5);
  std::vector<HistogramBucket> buckets(cap / 5);
  for (std::size_t b = 0; b < buckets.size(); ++b) buckets[b].lo = static_cast<int>(b) * 5;
  for (int words : counts) ++buckets[words / 5].count;
  return buckets;
}

namespace {

void write_histogram_file(const std::vector<HistogramBucket>& buckets, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write histogram: " + path.string());
  for (const auto& b : buckets) out << b.lo << '\t' << b.count << '\n';
}

}  // namespace

void write_report_file(const Report& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path.string());
  out << "fingerprint\t" << fingerprint_hex(report.fingerprint) << '\n';
  out << "model\taccuracy\ttp\tfp\ttn\tfn\n";
  char buf[160];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%ld\t%ld\t%ld\t%ld\n", row.model.c_str(),
                  row.accuracy, row.tp, row.fp, row.tn, row.fn);
    out << buf;
  }
}

Report run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  const auto t_start = std::chrono::steady_clock::now();

  const PipelinePaths paths(cfg.out);
  fs::create_directories(paths.out);

  Report report;
  report.fingerprint = cfg.fingerprint();
  const std::string fp_hex = fingerprint_hex(report.fingerprint);

  // Stale-cache check: a fingerprint mismatch invalidates every artifact.
  bool resume = false;
  if (fs::exists(paths.fingerprint_file())) {
    std::ifstream in(paths.fingerprint_file());
    std::string stored;
    in >> stored;
    resume = stored == fp_hex;
    if (!resume) log_stage("cache", "config fingerprint changed; rebuilding all artifacts");
  }
  if (!resume) {
    for (const auto& artifact : paths.artifacts()) fs::remove(artifact);
    std::ofstream out(paths.fingerprint_file(), std::ios::binary);
    out << fp_hex << '\n';
  }

  const auto stage_done = [&](const std::string& stage, bool was_resumed, const std::string& what) {
    (was_resumed ? report.resumed_stages : report.computed_stages).push_back(stage);
    log_stage(stage, (was_resumed ? "cached: " : "computed: ") + what);
  };

  // --- dataset ---------------------------------------------------------
  LabeledDataset dataset;
  if (resume && fs::exists(paths.dataset())) {
    dataset = load_dataset_tsv(paths.dataset().string());
    stage_done("dataset", true, std::to_string(dataset.size()) + " tweets");
  } else {
    dataset = obtain_dataset(cfg);
    if (dataset.size() < 2) throw DataError("dataset too small");
    save_dataset_tsv(dataset, paths.dataset().string());
    stage_done("dataset", false, std::to_string(dataset.size()) + " tweets");
  }

  std::vector<std::size_t> train_idx, test_idx;
  train_test_split(dataset.size(), cfg.data_test_fraction, cfg.seed, train_idx, test_idx);
  const LabeledDataset train_ds = subset(dataset, train_idx);
  const LabeledDataset test_ds = subset(dataset, test_idx);

  // --- vocabulary (train split only) -----------------------------------
  Vocabulary vocab;
  if (resume && fs::exists(paths.vocab())) {
    vocab = load_vocab(paths.vocab().string());
    stage_done("vocab", true, std::to_string(vocab.size()) + " tokens");
  } else {
    vocab = build_vocab(train_ds, cfg.vocab_max_size);
    save_vocab(vocab, paths.vocab().string());
    stage_done("vocab", false, std::to_string(vocab.size()) + " tokens");
  }

  // --- masked-token pretraining ----------------------------------------
  const EncoderConfig enc_cfg = cfg.encoder_config(vocab.size());
  EncoderParams<float> pretrained;
  if (resume && fs::exists(paths.pretrained())) {
    pretrained = load_encoder_file(paths.pretrained().string());
    stage_done("pretrain", true, "encoder loaded");
  } else {
    pretrained = init_encoder<float>(enc_cfg, cfg.seed);
    MlmLog mlm_log;
    if (cfg.pretrain_epochs > 0) {
      const auto idx = subsample(train_idx, cfg.pretrain_subsample, cfg.seed, 1);
      const LabeledDataset mlm_ds = subset(dataset, idx);
      mlm_log = pretrain_mlm(pretrained, mlm_ds, vocab, cfg.encode_attn_cap, cfg.pretrain_hyper());
    }
    save_encoder_file(paths.pretrained().string(), pretrained);
    write_mlm_log(paths.pretrain_log(), mlm_log);
    stage_done("pretrain", false,
               cfg.pretrain_epochs > 0 ? std::to_string(cfg.pretrain_epochs) + " epochs"
                                       : "disabled (initialized only)");
  }

  // --- fine-tuning -------------------------------------------------------
  EncoderParams<float> finetuned;
  HeadParams<float> head;
  if (resume && fs::exists(paths.finetuned())) {
    load_builtin_file(paths.finetuned().string(), finetuned, head);
    stage_done("finetune", true, "encoder+head loaded");
  } else {
    finetuned = pretrained;
    head = init_head<float>(enc_cfg.hidden, cfg.seed);
    TrainLog ft_log;
    if (cfg.finetune_epochs > 0) {
      const auto idx = subsample(train_idx, cfg.finetune_subsample, cfg.seed, 2);
      const LabeledDataset ft_ds = subset(dataset, idx);
      ft_log = fine_tune(finetuned, head, ft_ds, vocab, cfg.encode_max_len, cfg.finetune_hyper());
    }
    save_builtin_file(paths.finetuned().string(), finetuned, head);
    save_train_log(paths.finetune_log().string(), ft_log);
    stage_done("finetune", false,
               cfg.finetune_epochs > 0 ? std::to_string(cfg.finetune_epochs) + " epochs"
                                       : "disabled (head initialized only)");
  }

  // --- embedding extraction ---------------------------------------------
  // The cache always carries the attention corners so that both ablation
  // rows (hidden-only and hidden+attention) come from one extraction pass;
  // the hidden-only classifier reads the prefix.
  FeatureConfig fcfg_full = cfg.feature_config();
  fcfg_full.include_attention = true;
  FeatureConfig fcfg_hidden = fcfg_full;
  fcfg_hidden.include_attention = false;
  const int dim_full = embedding_dim(fcfg_full, enc_cfg.hidden);
  const int dim_hidden = embedding_dim(fcfg_hidden, enc_cfg.hidden);

  Mat<float> X;
  std::vector<std::uint8_t> labels;
  bool cache_ok = false;
  if (resume && fs::exists(paths.embeddings())) {
    load_embedding_cache(paths.embeddings().string(), X, labels);
    cache_ok = X.rows == static_cast<int>(dataset.size()) && X.cols == dim_full;
    if (!cache_ok) log_stage("embed", "cache shape mismatch; recomputing");
  }
  if (cache_ok) {
    stage_done("embed", true, std::to_string(X.rows) + " x " + std::to_string(X.cols));
  } else {
    EmbeddedDataset embedded = embed_dataset(finetuned, dataset, vocab, fcfg_full);
    X = std::move(embedded.X);
    labels = std::move(embedded.labels);
    save_embedding_cache(paths.embeddings().string(), X, labels);
    stage_done("embed", false, std::to_string(X.rows) + " x " + std::to_string(X.cols));
  }

  const std::vector<int> y_all = labels_to_int(labels);
  const SplitEmbeddings full = slice_embeddings(X, y_all, train_idx, test_idx, dim_full);
  const SplitEmbeddings hidden = slice_embeddings(X, y_all, train_idx, test_idx, dim_hidden);

  // --- classifiers --------------------------------------------------------
  MlpParams<float> mlp_hidden_model, mlp_full_model;
  FeatureConfig fcfg_loaded;
  if (resume && fs::exists(paths.mlp_hidden())) {
    load_mlp_file(paths.mlp_hidden().string(), mlp_hidden_model, fcfg_loaded);
    stage_done("mlp-hidden", true, "loaded");
  } else {
    const std::uint64_t s = derive_seed(cfg.seed, SeedStream::MlpTrain, 101);
    mlp_hidden_model = init_mlp<float>(dim_hidden, cfg.mlp_width, cfg.mlp_dropout, s);
    TrainHyper hyper = cfg.mlp_hyper();
    hyper.seed = s;
    const TrainLog log = train_mlp(mlp_hidden_model, hidden.x_train, hidden.y_train, hyper,
                                   &hidden.x_test, &hidden.y_test);
    save_mlp_file(paths.mlp_hidden().string(), mlp_hidden_model, fcfg_hidden);
    save_train_log(paths.mlp_hidden_log().string(), log);
    stage_done("mlp-hidden", false, "trained");
  }
  if (resume && fs::exists(paths.mlp_full())) {
    load_mlp_file(paths.mlp_full().string(), mlp_full_model, fcfg_loaded);
    stage_done("mlp-full", true, "loaded");
  } else {
    const std::uint64_t s = derive_seed(cfg.seed, SeedStream::MlpTrain, 102);
    mlp_full_model = init_mlp<float>(dim_full, cfg.mlp_width, cfg.mlp_dropout, s);
    TrainHyper hyper = cfg.mlp_hyper();
    hyper.seed = s;
    const TrainLog log =
        train_mlp(mlp_full_model, full.x_train, full.y_train, hyper, &full.x_test, &full.y_test);
    save_mlp_file(paths.mlp_full().string(), mlp_full_model, fcfg_full);
    save_train_log(paths.mlp_full_log().string(), log);
    stage_done("mlp-full", false, "trained");
  }

  Ensemble ens;
  if (resume && fs::exists(paths.ensemble_file())) {
    load_ensemble_file(paths.ensemble_file().string(), ens, fcfg_loaded);
    stage_done("ensemble", true, std::to_string(ens.models.size()) + " models");
  } else {
    const FoldAssignment folds = split_folds(full.x_train.rows, cfg.ensemble_k, cfg.seed);
    TrainHyper hyper = cfg.mlp_hyper();
    hyper.seed = derive_seed(cfg.seed, SeedStream::MlpTrain, 103);
    EnsembleTrainResult trained =
        train_ensemble(full.x_train, full.y_train, folds, cfg.mlp_dropout, cfg.mlp_width, hyper);
    ens = std::move(trained.ensemble);
    ens.feature_fingerprint = feature_fingerprint(fcfg_full);
    save_ensemble_file(paths.ensemble_file().string(), ens, fcfg_full);
    stage_done("ensemble", false, std::to_string(ens.models.size()) + " models");
  }

  LogRegParams<float> logreg;
  if (resume && fs::exists(paths.logreg())) {
    logreg = load_logreg_file(paths.logreg().string());
    stage_done("baseline", true, "loaded");
  } else {
    std::vector<BowVector> bows;
    bows.reserve(train_ds.size());
    std::vector<int> ys;
    for (const auto& tweet : train_ds.tweets) {
      bows.push_back(bow_featurize(tweet.text, vocab));
      ys.push_back(tweet.label);
    }
    LogRegHyper hyper{cfg.baseline_lr, cfg.baseline_epochs, cfg.baseline_l2};
    bool single_class = false;
    logreg = train_logreg<float>(bows, ys, vocab.size(), hyper, &single_class);
    if (single_class) log_stage("baseline", "warning: training labels are single-class");
    save_logreg_file(paths.logreg().string(), logreg);
    stage_done("baseline", false, "trained");
  }

  // --- evaluation ---------------------------------------------------------
  const auto add_row = [&report](const char* name, const EvalResult& r) {
    report.rows.push_back({name, r.accuracy, r.tp, r.fp, r.tn, r.fn});
  };

  {
    EvalResult r;
    for (std::size_t i = 0; i < test_ds.size(); ++i) {
      const double prob = static_cast<double>(
          builtin_classify(finetuned, head, test_ds.tweets[i].text, vocab, cfg.encode_max_len));
      const int pred = prob > 0.5 ? 1 : 0;
      const int y = test_ds.tweets[i].label;
      if (pred == 1 && y == 1) ++r.tp;
      if (pred == 1 && y == 0) ++r.fp;
      if (pred == 0 && y == 0) ++r.tn;
      if (pred == 0 && y == 1) ++r.fn;
    }
    r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(test_ds.size());
    add_row(kRowBuiltin, r);
  }
  add_row(kRowMlpHidden, evaluate(mlp_hidden_model, hidden.x_test, hidden.y_test));
  add_row(kRowMlpFull, evaluate(mlp_full_model, full.x_test, full.y_test));
  add_row(kRowEnsemble, evaluate(ens, full.x_test, full.y_test));
  {
    EvalResult r;
    for (std::size_t i = 0; i < test_ds.size(); ++i) {
      const BowVector bow = bow_featurize(test_ds.tweets[i].text, vocab);
      const int pred = predict_logreg(logreg, bow) > 0.5f ? 1 : 0;
      const int y = test_ds.tweets[i].label;
      if (pred == 1 && y == 1) ++r.tp;
      if (pred == 1 && y == 0) ++r.fp;
      if (pred == 0 && y == 0) ++r.tn;
      if (pred == 0 && y == 1) ++r.fn;
    }
    r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(test_ds.size());
    add_row(kRowBaseline, r);
  }

  // Five rows, always, or the run is broken.
  const char* expected[] = {kRowBuiltin, kRowMlpHidden, kRowMlpFull, kRowEnsemble, kRowBaseline};
  if (report.rows.size() != 5) throw NumericError("report is missing model rows");
  for (std::size_t i = 0; i < 5; ++i) {
    if (report.rows[i].model != expected[i]) throw NumericError("report rows are out of order");
  }

  write_report_file(report, paths.report());
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Stand-alone stage commands

std::vector<HistogramBucket> cmd_stats(const RunConfig& cfg) {
  const PipelinePaths paths(cfg.out);
  fs::create_directories(paths.out);
  const LabeledDataset ds = obtain_dataset(cfg);
  const auto buckets = word_count_histogram(ds);
  write_histogram_file(buckets, paths.histogram());
  return buckets;
}

void cmd_build_vocab(const RunConfig& cfg) {
  cfg.validate();
  const PipelinePaths paths(cfg.out);
  fs::create_directories(paths.out);
  const LabeledDataset dataset = obtain_dataset(cfg);
  std::vector<std::size_t> train_idx, test_idx;
  train_test_split(dataset.size(), cfg.data_test_fraction, cfg.seed, train_idx, test_idx);
  const Vocabulary vocab = build_vocab(subset(dataset, train_idx), cfg.vocab_max_size);
  save_vocab(vocab, paths.vocab().string());
  save_dataset_tsv(dataset, paths.dataset().string());
}

void cmd_pretrain(const RunConfig& cfg) {
  cfg.validate();
  const PipelinePaths paths(cfg.out);
  fs::create_directories(paths.out);
  const Vocabulary vocab = load_vocab(paths.vocab().string());
  const LabeledDataset dataset = obtain_dataset(cfg);
  std::vector<std::size_t> train_idx, test_idx;
  train_test_split(dataset.size(), cfg.data_test_fraction, cfg.seed, train_idx, test_idx);
  EncoderParams<float> enc = init_encoder<float>(cfg.encoder_config(vocab.size()), cfg.seed);
  MlmLog log;
  if (cfg.pretrain_epochs > 0) {
    const auto idx = subsample(train_idx, cfg.pretrain_subsample, cfg.seed, 1);
    log = pretrain_mlm(enc, subset(dataset, idx), vocab, cfg.encode_attn_cap, cfg.pretrain_hyper());
  }
  save_encoder_file(paths.pretrained().string(), enc);
  write_mlm_log(paths.pretrain_log(), log);
}

void cmd_finetune(const RunConfig& cfg) {
  cfg.validate();
  const PipelinePaths paths(cfg.out);
  const Vocabulary vocab = load_vocab(paths.vocab().string());
  EncoderParams<float> enc = load_encoder_file(paths.pretrained().string());
  HeadParams<float> head = init_head<float>(enc.config.hidden, cfg.seed);
  const LabeledDataset dataset = obtain_dataset(cfg);
  std::vector<std::size_t> train_idx, test_idx;
  train_test_split(dataset.size(), cfg.data_test_fraction, cfg.seed, train_idx, test_idx);
  TrainLog log;
  if (cfg.finetune_epochs > 0) {
    const auto idx = subsample(train_idx, cfg.finetune_subsample, cfg.seed, 2);
    log = fine_tune(enc, head, subset(dataset, idx), vocab, cfg.encode_max_len, cfg.finetune_hyper());
  }
  save_builtin_file(paths.finetuned().string(), enc, head);
  save_train_log(paths.finetune_log().string(), log);
}

void cmd_embed(const RunConfig& cfg) {
  cfg.validate();
  const PipelinePaths paths(cfg.out);
  const Vocabulary vocab = load_vocab(paths.vocab().string());
  EncoderParams<float> enc;
  HeadParams<float> head;
  load_builtin_file(paths.finetuned().string(), enc, head);
  const LabeledDataset dataset = obtain_dataset(cfg);
  const EmbeddedDataset embedded = embed_dataset(enc, dataset, vocab, cfg.feature_config());
  save_embedding_cache(paths.embeddings().string(), embedded.X, embedded.labels);
}

namespace {

// Loads the cache and slices the columns the configured features need; a
// hidden-only classifier may train from a cache built with attention.
void load_cache_for_features(const RunConfig& cfg, const FeatureConfig& fcfg, Mat<float>& X,
                             std::vector<std::uint8_t>& labels) {
  const PipelinePaths paths(cfg.out);
  Mat<float> full;
  load_embedding_cache(paths.embeddings().string(), full, labels);
  const int want = embedding_dim(fcfg, cfg.enc_hidden);
  if (full.cols == want) {
    X = std::move(full);
    return;
  }
  if (!fcfg.include_attention && full.cols == want + fcfg.corner_k * fcfg.corner_k) {
    X = Mat<float>(full.rows, want);
    for (int i = 0; i < full.rows; ++i) {
      std::copy(full.row(i), full.row(i) + want, X.row(i));
    }
    return;
  }
  throw DataError("embedding cache has dimension " + std::to_string(full.cols) +
                  " but the configured features need " + std::to_string(want));
}

}  // namespace

void cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const PipelinePaths paths(cfg.out);
  const FeatureConfig fcfg = cfg.feature_config();
  Mat<float> X;
  std::vector<std::uint8_t> labels;
  load_cache_for_features(cfg, fcfg, X, labels);
  const std::vector<int> y = labels_to_int(labels);

  std::vector<std::size_t> train_idx, test_idx;
  train_test_split(X.rows, cfg.data_test_fraction, cfg.seed, train_idx, test_idx);
  const SplitEmbeddings s = slice_embeddings(X, y, train_idx, test_idx, X.cols);

  const std::uint64_t seed =
      derive_seed(cfg.seed, SeedStream::MlpTrain, fcfg.include_attention ? 102 : 101);
  MlpParams<float> model = init_mlp<float>(X.cols, cfg.mlp_width, cfg.mlp_dropout, seed);
  TrainHyper hyper = cfg.mlp_hyper();
  hyper.seed = seed;
  const TrainLog log = train_mlp(model, s.x_train, s.y_train, hyper, &s.x_test, &s.y_test);
  const auto model_path = fcfg.include_attention ? paths.mlp_full() : paths.mlp_hidden();
  const auto log_path = fcfg.include_attention ? paths.mlp_full_log() : paths.mlp_hidden_log();
  save_mlp_file(model_path.string(), model, fcfg);
  save_train_log(log_path.string(), log);
}

void cmd_train_ensemble(const RunConfig& cfg) {
  cfg.validate();
  const PipelinePaths paths(cfg.out);
  const FeatureConfig fcfg = cfg.feature_config();
  Mat<float> X;
  std::vector<std::uint8_t> labels;
  load_cache_for_features(cfg, fcfg, X, labels);
  const std::vector<int> y = labels_to_int(labels);

  std::vector<std::size_t> train_idx, test_idx;
  train_test_split(X.rows, cfg.data_test_fraction, cfg.seed, train_idx, test_idx);
  const SplitEmbeddings s = slice_embeddings(X, y, train_idx, test_idx, X.cols);

  const FoldAssignment folds = split_folds(s.x_train.rows, cfg.ensemble_k, cfg.seed);
  TrainHyper hyper = cfg.mlp_hyper();
  hyper.seed = derive_seed(cfg.seed, SeedStream::MlpTrain, 103);
  EnsembleTrainResult trained =
      train_ensemble(s.x_train, s.y_train, folds, cfg.mlp_dropout, cfg.mlp_width, hyper);
  trained.ensemble.feature_fingerprint = feature_fingerprint(fcfg);
  save_ensemble_file(paths.ensemble_file().string(), trained.ensemble, fcfg);
}

namespace {

struct LoadedModel {
  ModelKind kind;
  MlpParams<float> mlp;
  Ensemble ens;
  EncoderParams<float> enc;
  HeadParams<float> head;
  LogRegParams<float> logreg;
  FeatureConfig fcfg;
};

LoadedModel load_any_model(const std::string& model_path, const std::string& vocab_path,
                           const std::string& encoder_path, const Vocabulary** vocab_out,
                           Vocabulary& vocab_storage) {
  LoadedModel m;
  m.kind = peek_model_kind(model_path);
  vocab_storage = load_vocab(vocab_path);
  *vocab_out = &vocab_storage;
  switch (m.kind) {
    case ModelKind::Mlp:
      load_mlp_file(model_path, m.mlp, m.fcfg);
      m.enc = load_encoder_file(encoder_path);
      break;
    case ModelKind::Ensemble:
      load_ensemble_file(model_path, m.ens, m.fcfg);
      m.enc = load_encoder_file(encoder_path);
      break;
    case ModelKind::Builtin:
      load_builtin_file(model_path, m.enc, m.head);
      break;
    case ModelKind::LogReg:
      m.logreg = load_logreg_file(model_path);
      break;
    case ModelKind::Encoder:
      throw DataError(model_path + " holds a bare encoder; train a classifier to predict with it");
  }
  return m;
}

}  // namespace

PredictResult cmd_predict(const RunConfig& cfg, const std::string& model_path,
                          const std::string& text, std::string vocab_path,
                          std::string encoder_path) {
  const PipelinePaths paths(cfg.out);
  if (vocab_path.empty()) vocab_path = paths.vocab().string();
  if (encoder_path.empty()) encoder_path = paths.finetuned().string();

  Vocabulary vocab_storage;
  const Vocabulary* vocab = nullptr;
  const LoadedModel m = load_any_model(model_path, vocab_path, encoder_path, &vocab, vocab_storage);

  PredictResult result;
  switch (m.kind) {
    case ModelKind::Mlp: {
      const TweetEmbedding emb = embed_tweet(m.enc, text, *vocab, m.fcfg);
      if (emb.length() != m.mlp.d_in) {
        throw DataError("embedding dimension " + std::to_string(emb.length()) +
                        " does not match the classifier input " + std::to_string(m.mlp.d_in));
      }
      result.probability = static_cast<double>(mlp_forward_eval(m.mlp, emb.values.data()));
      result.label = result.probability > 0.5 ? 1 : 0;
      break;
    }
    case ModelKind::Ensemble: {
      const TweetEmbedding emb = embed_tweet(m.enc, text, *vocab, m.fcfg);
      std::vector<double> probs;
      for (const auto& model : m.ens.models) {
        probs.push_back(static_cast<double>(mlp_forward_eval(model, emb.values.data())));
      }
      result.label = majority_vote(probs);
      result.probability = ensemble_mean_prob(m.ens, emb.values.data());
      break;
    }
    case ModelKind::Builtin: {
      result.probability = static_cast<double>(
          builtin_classify(m.enc, m.head, text, *vocab, cfg.encode_max_len));
      result.label = result.probability > 0.5 ? 1 : 0;
      break;
    }
    case ModelKind::LogReg: {
      const BowVector bow = bow_featurize(text, *vocab);
      result.probability = static_cast<double>(predict_logreg(m.logreg, bow));
      result.label = result.probability > 0.5 ? 1 : 0;
      break;
    }
    case ModelKind::Encoder:
      break;  // unreachable; load_any_model throws
  }
  return result;
}

EvalResult cmd_evaluate(const RunConfig& cfg, const std::string& model_path, std::string vocab_path,
                        std::string encoder_path) {
  const PipelinePaths paths(cfg.out);
  if (vocab_path.empty()) vocab_path = paths.vocab().string();
  if (encoder_path.empty()) encoder_path = paths.finetuned().string();

  const LabeledDataset dataset = obtain_dataset(cfg);
  if (dataset.tweets.empty()) throw DataError("cannot evaluate on an empty dataset");

  Vocabulary vocab_storage;
  const Vocabulary* vocab = nullptr;
  const LoadedModel m = load_any_model(model_path, vocab_path, encoder_path, &vocab, vocab_storage);

  EvalResult r;
  const auto tally = [&r](int pred, int y) {
    if (pred == 1 && y == 1) ++r.tp;
    if (pred == 1 && y == 0) ++r.fp;
    if (pred == 0 && y == 0) ++r.tn;
    if (pred == 0 && y == 1) ++r.fn;
  };
  for (const auto& tweet : dataset.tweets) {
    int pred = 0;
    switch (m.kind) {
      case ModelKind::Mlp: {
        const TweetEmbedding emb = embed_tweet(m.enc, tweet.text, *vocab, m.fcfg);
        pred = mlp_forward_eval(m.mlp, emb.values.data()) > 0.5f ? 1 : 0;
        break;
      }
      case ModelKind::Ensemble: {
        const TweetEmbedding emb = embed_tweet(m.enc, tweet.text, *vocab, m.fcfg);
        pred = ensemble_predict(m.ens, emb.values.data());
        break;
      }
      case ModelKind::Builtin:
        pred = builtin_classify(m.enc, m.head, tweet.text, *vocab, cfg.encode_max_len) > 0.5f ? 1 : 0;
        break;
      case ModelKind::LogReg:
        pred = predict_logreg(m.logreg, bow_featurize(tweet.text, *vocab)) > 0.5f ? 1 : 0;
        break;
      case ModelKind::Encoder:
        break;
    }
    tally(pred, tweet.label);
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(dataset.size());
  return r;
}

}  // namespace atsn
