#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "atsn/common.hpp"
#include "atsn/corpus.hpp"
#include "atsn/rng.hpp"
#include "test_util.hpp"

using namespace atsn;

TEST_CASE("two-file loading keeps positives then negatives") {
  testutil::TempDir dir("corpus_two_file");
  {
    std::ofstream pos(dir.file("pos.txt"));
    pos << "good\n\n";
    std::ofstream neg(dir.file("neg.txt"));
    neg << "bad\n";
  }
  const auto ds = load_dataset_two_file(dir.file("pos.txt"), dir.file("neg.txt"));
  REQUIRE(ds.size() == 2);
  CHECK(ds.tweets[0].text == "good");
  CHECK(ds.tweets[0].label == 1);
  CHECK(ds.tweets[1].text == "bad");
  CHECK(ds.tweets[1].label == 0);

  CHECK_THROWS_AS(load_dataset_two_file(dir.file("missing.txt"), dir.file("neg.txt")), DataError);
}

TEST_CASE("tsv loading parses labels and flags bad lines by number") {
  testutil::TempDir dir("corpus_tsv");
  {
    std::ofstream tsv(dir.file("data.tsv"));
    tsv << "1\thello\n\n0\tugh\n";
  }
  const auto ds = load_dataset_tsv(dir.file("data.tsv"));
  REQUIRE(ds.size() == 2);
  CHECK(ds.tweets[0].label == 1);
  CHECK(ds.tweets[0].text == "hello");
  CHECK(ds.tweets[1].label == 0);

  {
    std::ofstream tsv(dir.file("bad.tsv"));
    tsv << "2\thello\n";
  }
  try {
    load_dataset_tsv(dir.file("bad.tsv"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("dataset save/load round-trips order and labels") {
  testutil::TempDir dir("corpus_roundtrip");
  const auto ds = generate_synthetic(50, 40, 3);
  save_dataset_tsv(ds, dir.file("ds.tsv"));
  const auto loaded = load_dataset_tsv(dir.file("ds.tsv"));
  REQUIRE(loaded.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(loaded.tweets[i].text == ds.tweets[i].text);
    CHECK(loaded.tweets[i].label == ds.tweets[i].label);
  }
}

TEST_CASE("synthetic corpus is deterministic") {
  const auto a = generate_synthetic(10, 100, 7);
  const auto b = generate_synthetic(10, 100, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.tweets[i].text == b.tweets[i].text);
    CHECK(a.tweets[i].label == b.tweets[i].label);
  }
  const auto c = generate_synthetic(10, 100, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a.tweets[i].text != c.tweets[i].text;
  CHECK(any_diff);
}

// Oracle: re-scoring every tweet with the generating lexicon must reproduce
// its label exactly, for several sizes and seeds.
TEST_CASE("synthetic labels equal the lexicon majority") {
  for (const int vocab : {20, 100, 200}) {
    const auto lex = make_lexicon(vocab);
    for (const std::uint64_t seed : {1ull, 2ull, 99ull}) {
      const auto ds = generate_synthetic(200, vocab, seed);
      for (const auto& tweet : ds.tweets) {
        const int score = lex.score_text(tweet.text);
        CHECK(score != 0);
        CHECK((score > 0 ? 1 : 0) == tweet.label);
      }
    }
  }
}

TEST_CASE("synthetic corpus is balanced and word counts stay in 5..30") {
  const auto ds = generate_synthetic(1000, 200, 1);
  int pos = 0;
  for (const auto& tweet : ds.tweets) {
    pos += tweet.label;
    int words = 1;
    for (char ch : tweet.text) words += ch == ' ';
    CHECK(words >= 5);
    CHECK(words <= 30);
  }
  CHECK(pos == 500);
}

TEST_CASE("synthetic places a sentiment word near an end") {
  const auto ds = generate_synthetic(300, 100, 5);
  const auto lex = make_lexicon(100);
  for (const auto& tweet : ds.tweets) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : tweet.text) {
      if (ch == ' ') {
        words.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    words.push_back(cur);
    bool near_end = false;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i >= 3 && i + 3 < words.size()) continue;
      const int s = lex.score_text(words[i]);
      if ((tweet.label == 1 && s > 0) || (tweet.label == 0 && s < 0)) near_end = true;
    }
    CHECK(near_end);
  }
}

TEST_CASE("synthetic rejects bad sizes") {
  CHECK_THROWS_AS(generate_synthetic(1, 100, 1), DataError);
  CHECK_THROWS_AS(generate_synthetic(10, 19, 1), DataError);
}

TEST_CASE("folds partition evenly") {
  const auto ds = generate_synthetic(10, 40, 2);
  const auto fa = split_folds(ds, 5, 11);
  REQUIRE(fa.fold_of.size() == 10);
  std::vector<int> sizes(5, 0);
  for (int f : fa.fold_of) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    ++sizes[f];
  }
  for (int s : sizes) CHECK(s == 2);

  const auto fb = split_folds(ds, 5, 11);
  CHECK(fa.fold_of == fb.fold_of);
}

TEST_CASE("fold partition property holds for random shapes") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(8));
    const std::size_t n = k + rng.uniform_int(200);
    const auto fa = split_folds(n, k, rng.next_u64());
    std::vector<int> sizes(k, 0);
    for (int f : fa.fold_of) ++sizes[f];
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 1);
    std::size_t total = 0;
    for (int s : sizes) total += static_cast<std::size_t>(s);
    CHECK(total == n);
  }
}

TEST_CASE("folds reject k larger than the dataset") {
  CHECK_THROWS_AS(split_folds(3, 5, 1), DataError);
  CHECK_THROWS_AS(split_folds(10, 1, 1), DataError);
}
