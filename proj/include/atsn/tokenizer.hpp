#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "atsn/corpus.hpp"

namespace atsn {

// Word-level vocabulary with three reserved ids. Ids are contiguous and the
// two lookup directions invert each other.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;
  static constexpr int kReserved = 3;

  Vocabulary();

  int size() const { return static_cast<int>(id_to_token_.size()); }

  // Token -> id, UNK for out-of-vocabulary tokens.
  int lookup(const std::string& token) const;
  const std::string& lookup(int id) const;

  void add_token(const std::string& token);

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Fixed- or variable-length encoding of one tweet. The mask is a run of 1s
// (real tokens) followed by 0s (padding); ids[i] is PAD exactly where
// mask[i] is 0. original_len counts tokens before padding/cropping.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  int original_len = 0;

  int length() const { return static_cast<int>(ids.size()); }
  int real_len() const;
};

// Lowercased alphanumeric runs; bytes >= 0x80 count as word characters so
// UTF-8 words stay intact. Everything else separates tokens.
std::vector<std::string> tokenize(const std::string& text);

// Most frequent tokens first (ties lexicographic), truncated to max_size
// including the reserved ids.
Vocabulary build_vocab(const LabeledDataset& corpus, int max_size);

// Pads with PAD or crops the tail so the sequence has exactly max_len ids.
TokenSequence encode(const std::string& text, const Vocabulary& vocab, int max_len);

// No padding; length is min(token count, cap). The cap is a memory guard.
TokenSequence encode_unbounded(const std::string& text, const Vocabulary& vocab, int cap = 128);

// Drops trailing padding; hidden states at real positions are unaffected
// because padded keys carry zero attention.
TokenSequence crop_padding(const TokenSequence& seq);

void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

}  // namespace atsn
