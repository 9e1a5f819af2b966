#include "atsn/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "atsn/common.hpp"
#include "atsn/rng.hpp"

namespace atsn {

namespace {

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string rstrip_cr(std::string line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  return line;
}

bool is_blank(const std::string& line) {
  for (char c : line) {
    if (c != ' ' && c != '\t') return false;
  }
  return true;
}

}  // namespace

int SyntheticLexicon::score_text(const std::string& text) const {
  std::unordered_map<std::string, int> index;
  index.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) index.emplace(words[i], static_cast<int>(i));
  int score = 0;
  for (const auto& w : split_whitespace(text)) {
    auto it = index.find(w);
    if (it == index.end()) continue;
    if (is_positive(it->second)) ++score;
    if (is_negative(it->second)) --score;
  }
  return score;
}

SyntheticLexicon make_lexicon(int vocab_size) {
  if (vocab_size < 20) throw DataError("synthetic lexicon needs vocab_size >= 20");
  SyntheticLexicon lex;
  lex.positive_count = vocab_size / 10;
  lex.negative_count = vocab_size / 10;
  lex.words.reserve(vocab_size);
  for (int i = 0; i < lex.positive_count; ++i) lex.words.push_back("good" + std::to_string(i));
  for (int i = 0; i < lex.negative_count; ++i) lex.words.push_back("bad" + std::to_string(i));
  for (int i = lex.neutral_begin(); i < vocab_size; ++i) lex.words.push_back("word" + std::to_string(i));
  return lex;
}

LabeledDataset generate_synthetic(int n, int vocab_size, std::uint64_t seed) {
  if (n < 2) throw DataError("synthetic corpus needs n >= 2");
  const SyntheticLexicon lex = make_lexicon(vocab_size);
  const int neutral_count = vocab_size - lex.neutral_begin();

  Rng rng(derive_seed(seed, SeedStream::Synthetic));
  LabeledDataset ds;
  ds.source = "synthetic(n=" + std::to_string(n) + ",vocab=" + std::to_string(vocab_size) +
              ",seed=" + std::to_string(seed) + ")";
  ds.tweets.reserve(n);

  std::vector<int> slots;
  std::vector<std::size_t> free_slots;
  for (int t = 0; t < n; ++t) {
    const int label = (t % 2 == 0) ? 1 : 0;
    const int len = 5 + static_cast<int>(rng.uniform_int(26));  // 5..30 words
    const int major = 1 + static_cast<int>(rng.uniform_int(3));
    const int minor = static_cast<int>(rng.uniform_int(static_cast<std::size_t>(major)));

    slots.assign(len, -1);
    // One label-matching word goes near an end of the tweet; emotional words
    // cluster there and the attention-corner features are meant to see them.
    const int ends[6] = {0, 1, 2, len - 3, len - 2, len - 1};
    const int boundary = ends[rng.uniform_int(6)];
    const auto pick_major = [&] {
      return label == 1 ? static_cast<int>(rng.uniform_int(lex.positive_count))
                        : lex.positive_count + static_cast<int>(rng.uniform_int(lex.negative_count));
    };
    const auto pick_minor = [&] {
      return label == 1 ? lex.positive_count + static_cast<int>(rng.uniform_int(lex.negative_count))
                        : static_cast<int>(rng.uniform_int(lex.positive_count));
    };
    slots[boundary] = pick_major();

    free_slots.clear();
    for (int i = 0; i < len; ++i) {
      if (slots[i] < 0) free_slots.push_back(static_cast<std::size_t>(i));
    }
    rng.shuffle(free_slots);
    std::size_t next_free = 0;
    for (int i = 1; i < major; ++i) slots[free_slots[next_free++]] = pick_major();
    for (int i = 0; i < minor; ++i) slots[free_slots[next_free++]] = pick_minor();
    for (int i = 0; i < len; ++i) {
      if (slots[i] < 0) slots[i] = lex.neutral_begin() + static_cast<int>(rng.uniform_int(neutral_count));
    }

    std::string text;
    for (int i = 0; i < len; ++i) {
      if (i) text.push_back(' ');
      text += lex.words[slots[i]];
    }
    ds.tweets.push_back({std::move(text), label});
  }
  return ds;
}

namespace {

void load_one_class(const std::string& path, int label, LabeledDataset& ds) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    line = rstrip_cr(line);
    if (is_blank(line)) continue;
    ds.tweets.push_back({line, label});
  }
}

}  // namespace

LabeledDataset load_dataset_two_file(const std::string& pos_path, const std::string& neg_path) {
  LabeledDataset ds;
  ds.source = pos_path + "+" + neg_path;
  load_one_class(pos_path, 1, ds);
  load_one_class(neg_path, 0, ds);
  return ds;
}

LabeledDataset load_dataset_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  LabeledDataset ds;
  ds.source = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = rstrip_cr(line);
    if (is_blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("malformed TSV at line " + std::to_string(lineno) + ": missing tab in " + path);
    }
    const std::string label_field = line.substr(0, tab);
    const std::string text = line.substr(tab + 1);
    if (label_field != "0" && label_field != "1") {
      throw DataError("malformed TSV at line " + std::to_string(lineno) + ": label '" + label_field +
                      "' is not 0/1 in " + path);
    }
    if (is_blank(text)) {
      throw DataError("malformed TSV at line " + std::to_string(lineno) + ": empty text in " + path);
    }
    ds.tweets.push_back({text, label_field == "1" ? 1 : 0});
  }
  return ds;
}

void save_dataset_tsv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const auto& tweet : ds.tweets) {
    out << tweet.label << '\t' << tweet.text << '\n';
  }
}

FoldAssignment split_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("fold count must be >= 2");
  if (n < static_cast<std::size_t>(k)) throw DataError("fold count exceeds dataset size");
  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.resize(n);
  const auto idx = shuffled_indices(n, derive_seed(seed, SeedStream::Folds));
  for (std::size_t j = 0; j < n; ++j) fa.fold_of[idx[j]] = static_cast<int>(j % k);
  return fa;
}

FoldAssignment split_folds(const LabeledDataset& ds, int k, std::uint64_t seed) {
  return split_folds(ds.size(), k, seed);
}

}  // namespace atsn
