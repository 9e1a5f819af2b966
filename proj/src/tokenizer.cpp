#include "atsn/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "atsn/common.hpp"

namespace atsn {

namespace {

const char* kReservedNames[Vocabulary::kReserved] = {"<pad>", "<unk>", "<mask>"};

bool is_word_char(unsigned char c) {
  if (c >= 0x80) return true;
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char to_lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) add_token(name);
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::lookup(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
  return id_to_token_[id];
}

void Vocabulary::add_token(const std::string& token) {
  if (token_to_id_.count(token)) throw DataError("duplicate vocabulary token: " + token);
  token_to_id_.emplace(token, size());
  id_to_token_.push_back(token);
}

int TokenSequence::real_len() const {
  int n = 0;
  for (auto m : mask) n += m;
  return n;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      cur.push_back(to_lower_ascii(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary build_vocab(const LabeledDataset& corpus, int max_size) {
  if (max_size < Vocabulary::kReserved + 1) throw DataError("vocab max_size must be >= 4");
  if (corpus.tweets.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  // std::map keeps ties lexicographic after the stable frequency sort.
  std::map<std::string, std::size_t> freq;
  for (const auto& tweet : corpus.tweets) {
    for (auto& token : tokenize(tweet.text)) ++freq[token];
  }
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  const std::size_t capacity = static_cast<std::size_t>(max_size) - Vocabulary::kReserved;
  for (std::size_t i = 0; i < items.size() && i < capacity; ++i) vocab.add_token(items[i].first);
  return vocab;
}

TokenSequence encode(const std::string& text, const Vocabulary& vocab, int max_len) {
  if (max_len < 1) throw DataError("encode max_len must be >= 1");
  const auto tokens = tokenize(text);
  TokenSequence seq;
  seq.original_len = static_cast<int>(tokens.size());
  seq.ids.assign(max_len, Vocabulary::kPad);
  seq.mask.assign(max_len, 0);
  const int real = std::min<int>(max_len, seq.original_len);
  for (int i = 0; i < real; ++i) {
    seq.ids[i] = vocab.lookup(tokens[i]);
    seq.mask[i] = 1;
  }
  return seq;
}

TokenSequence encode_unbounded(const std::string& text, const Vocabulary& vocab, int cap) {
  if (cap < 16) throw DataError("encode_unbounded cap must be >= 16");
  const auto tokens = tokenize(text);
  TokenSequence seq;
  seq.original_len = static_cast<int>(tokens.size());
  const int len = std::min<int>(cap, seq.original_len);
  seq.ids.reserve(len);
  seq.mask.assign(len, 1);
  for (int i = 0; i < len; ++i) seq.ids.push_back(vocab.lookup(tokens[i]));
  return seq;
}

TokenSequence crop_padding(const TokenSequence& seq) {
  const int real = seq.real_len();
  TokenSequence out;
  out.original_len = seq.original_len;
  out.ids.assign(seq.ids.begin(), seq.ids.begin() + real);
  out.mask.assign(real, 1);
  return out;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (int id = 0; id < vocab.size(); ++id) {
    out << vocab.lookup(id) << '\t' << id << '\n';
  }
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("malformed vocabulary line " + std::to_string(lineno) + " in " + path);
    }
    const std::string token = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id < Vocabulary::kReserved) {
      if (token != kReservedNames[id]) {
        throw DataError("vocabulary file " + path + " has a bad reserved token at line " +
                        std::to_string(lineno));
      }
      continue;  // constructor already added it
    }
    if (id != vocab.size()) {
      throw DataError("vocabulary ids must be contiguous; got " + std::to_string(id) + " at line " +
                      std::to_string(lineno) + " in " + path);
    }
    vocab.add_token(token);
  }
  return vocab;
}

}  // namespace atsn
