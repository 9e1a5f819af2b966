#include "atsn/baseline.hpp"

namespace atsn {

BowVector bow_featurize(const std::string& text, const Vocabulary& vocab) {
  BowVector counts;
  for (const auto& token : tokenize(text)) {
    ++counts[vocab.lookup(token)];
  }
  return counts;
}

}  // namespace atsn
