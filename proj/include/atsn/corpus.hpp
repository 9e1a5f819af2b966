#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace atsn {

// One tweet; label is 0 (negative), 1 (positive) or -1 (unlabeled).
struct Tweet {
  std::string text;
  int label = -1;
};

struct LabeledDataset {
  std::vector<Tweet> tweets;
  std::string source;

  std::size_t size() const { return tweets.size(); }
};

// Maps every dataset index to a fold id in [0, k). Folds partition the
// index set and sizes differ by at most one.
struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;
};

// Word lists backing the synthetic corpus. The first tenth of the lexicon is
// positive, the second tenth negative, the rest neutral. Tweet labels equal
// the majority sentiment of their words, so a plain lexicon scorer can
// reproduce every label exactly; that scorer is the test oracle.
struct SyntheticLexicon {
  std::vector<std::string> words;
  int positive_count = 0;
  int negative_count = 0;

  bool is_positive(int i) const { return i < positive_count; }
  bool is_negative(int i) const { return i >= positive_count && i < positive_count + negative_count; }
  int neutral_begin() const { return positive_count + negative_count; }

  // +1 per positive word, -1 per negative word; label = (score > 0).
  int score_text(const std::string& text) const;
};

SyntheticLexicon make_lexicon(int vocab_size);

// Deterministic synthetic sentiment corpus. Every tweet is 5-30 words with a
// strict majority of label-matching sentiment words, at least one of which
// sits in the first three or last three positions. Classes balance within 1.
LabeledDataset generate_synthetic(int n, int vocab_size, std::uint64_t seed);

// Two-file format: one tweet per line, positives then negatives.
LabeledDataset load_dataset_two_file(const std::string& pos_path, const std::string& neg_path);

// TSV format: `label<TAB>text` per line, labels 0/1.
LabeledDataset load_dataset_tsv(const std::string& path);

void save_dataset_tsv(const LabeledDataset& ds, const std::string& path);

FoldAssignment split_folds(std::size_t n, int k, std::uint64_t seed);
FoldAssignment split_folds(const LabeledDataset& ds, int k, std::uint64_t seed);

}  // namespace atsn
