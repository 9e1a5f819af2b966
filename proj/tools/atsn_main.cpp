// atsn — tweet sentiment experiments with transformer-internal features.
//
// Subcommands mirror the pipeline stages; every config key is also a flag of
// the same name, applied on top of --config. Exit codes: 0 ok, 1 usage,
// 2 data/format error, 3 numeric failure.

#include <cstdio>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "atsn/common.hpp"
#include "atsn/config.hpp"
#include "atsn/pipeline.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

// Registers --config plus one string flag per config key on a subcommand.
void add_config_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "Config file of `key = value` lines");
  for (const auto& key : atsn::RunConfig::keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&state, key](const std::string& value) { state.overrides[key] = value; },
        "Override config key " + key);
  }
}

atsn::RunConfig make_config(const CliState& state) {
  atsn::RunConfig cfg;
  if (!state.config_path.empty()) atsn::apply_config_file(cfg, state.config_path);
  for (const auto& [key, value] : state.overrides) cfg.set(key, value);
  if (cfg.threads > 0) atsn::set_thread_count(cfg.threads);
  return cfg;
}

void print_report(const atsn::Report& report) {
  std::printf("model\taccuracy\ttp\tfp\ttn\tfn\n");
  for (const auto& row : report.rows) {
    std::printf("%s\t%.4f\t%ld\t%ld\t%ld\t%ld\n", row.model.c_str(), row.accuracy, row.tp, row.fp,
                row.tn, row.fn);
  }
  std::printf("fingerprint\t%016llx\n", static_cast<unsigned long long>(report.fingerprint));
  std::printf("runtime_seconds\t%.1f\n", report.runtime_seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tweet sentiment classification with transformer-internal features"};
  app.require_subcommand(1);

  CliState state;
  std::string model_path, vocab_path, encoder_path, text;

  CLI::App* stats = app.add_subcommand("stats", "Word-count histogram of the dataset");
  CLI::App* build_vocab = app.add_subcommand("build-vocab", "Build and save the vocabulary");
  CLI::App* pretrain = app.add_subcommand("pretrain", "Masked-token pretraining of the encoder");
  CLI::App* finetune = app.add_subcommand("finetune", "Fine-tune the encoder with a linear head");
  CLI::App* embed = app.add_subcommand("embed", "Extract tweet embeddings into the cache");
  CLI::App* train = app.add_subcommand("train", "Train one MLP classifier from the cache");
  CLI::App* train_ens = app.add_subcommand("train-ensemble", "Train the k-fold voting ensemble");
  CLI::App* predict = app.add_subcommand("predict", "Classify one tweet with a saved model");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Accuracy of a saved model on the dataset");
  CLI::App* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");

  for (CLI::App* cmd : {stats, build_vocab, pretrain, finetune, embed, train, train_ens, predict,
                        evaluate, pipeline}) {
    add_config_options(cmd, state);
  }
  for (CLI::App* cmd : {predict, evaluate}) {
    cmd->add_option("--model", model_path, "Saved model file")->required();
    cmd->add_option("--vocab", vocab_path, "Vocabulary file (default: <out>/vocab.tsv)");
    cmd->add_option("--encoder", encoder_path,
                    "Encoder file for embedding models (default: <out>/finetuned.atsn)");
  }
  predict->add_option("text", text, "Tweet text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    const atsn::RunConfig cfg = make_config(state);
    if (*stats) {
      const auto buckets = atsn::cmd_stats(cfg);
      for (const auto& b : buckets) std::printf("%d\t%zu\n", b.lo, b.count);
    } else if (*build_vocab) {
      atsn::cmd_build_vocab(cfg);
    } else if (*pretrain) {
      atsn::cmd_pretrain(cfg);
    } else if (*finetune) {
      atsn::cmd_finetune(cfg);
    } else if (*embed) {
      atsn::cmd_embed(cfg);
    } else if (*train) {
      atsn::cmd_train(cfg);
    } else if (*train_ens) {
      atsn::cmd_train_ensemble(cfg);
    } else if (*predict) {
      const auto result = atsn::cmd_predict(cfg, model_path, text, vocab_path, encoder_path);
      std::printf("%d\t%.4f\n", result.label, result.probability);
    } else if (*evaluate) {
      const auto result = atsn::cmd_evaluate(cfg, model_path, vocab_path, encoder_path);
      std::printf("accuracy\t%.4f\ntp\t%ld\nfp\t%ld\ntn\t%ld\nfn\t%ld\n", result.accuracy, result.tp,
                  result.fp, result.tn, result.fn);
    } else if (*pipeline) {
      const atsn::Report report = atsn::run_pipeline(cfg);
      print_report(report);
    }
  } catch (const atsn::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const atsn::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const atsn::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
