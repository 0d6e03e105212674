//
// Copyright 2026 The wfax Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "wfax/corpus.hpp"

#include <random>
#include <set>
#include <sstream>

#include "gtest/gtest.h"

namespace wfax {
namespace {

Sentence S(std::vector<std::string> words, std::optional<int> label = std::nullopt) {
  return Sentence{std::move(words), label};
}

TEST(TokenizeTest, LowercasesAndStripsBoundaryPunctuation) {
  EXPECT_EQ(tokenize("  Hello, World!  it's (fine) <unk> ..."),
            (std::vector<std::string>{"hello", "world", "it's", "fine", "<unk>"}));
  EXPECT_TRUE(tokenize(" \t ").empty());
}

TEST(AlphabetTest, CountsAndRanks) {
  const std::vector<Sentence> corpus = {S({"a", "b", "a"})};
  const auto alphabet = build_alphabet(corpus);
  EXPECT_EQ(alphabet.count("a"), 2);
  EXPECT_EQ(alphabet.count("b"), 1);
  EXPECT_EQ(alphabet.rank("a"), 1u);
  EXPECT_EQ(alphabet.rank("b"), 2u);
}

TEST(AlphabetTest, TiesBrokenByFirstOccurrence) {
  const std::vector<Sentence> corpus = {S({"a"}), S({"b"})};
  const auto alphabet = build_alphabet(corpus);
  EXPECT_EQ(alphabet.rank("a"), 1u);
  EXPECT_EQ(alphabet.rank("b"), 2u);

  const std::vector<Sentence> reversed = {S({"b"}), S({"a"})};
  EXPECT_EQ(build_alphabet(reversed).rank("b"), 1u);
}

TEST(AlphabetTest, EmptyCorpusIsAnError) {
  const std::vector<Sentence> none;
  EXPECT_THROW(build_alphabet(none), Error);
  try {
    build_alphabet(none);
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty corpus");
  }
}

TEST(AlphabetTest, UnknownTokenOnlyWhenRequested) {
  const std::vector<Sentence> corpus = {S({"a", "b"})};
  auto alphabet = build_alphabet(corpus);
  EXPECT_FALSE(alphabet.contains(kUnkToken));
  alphabet.ensure_unknown();
  alphabet.ensure_unknown();
  EXPECT_TRUE(alphabet.contains(kUnkToken));
  EXPECT_EQ(alphabet.size(), 3u);
  EXPECT_EQ(alphabet.rank(kUnkToken), 3u);
}

// Rank bijectivity and count conservation on random corpora.
TEST(AlphabetTest, RandomCorporaKeepRankAndCountInvariants) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Sentence> corpus;
    std::int64_t total = 0;
    const int sentences = 1 + static_cast<int>(rng() % 30);
    for (int s = 0; s < sentences; ++s) {
      Sentence sent;
      const int len = 1 + static_cast<int>(rng() % 12);
      for (int i = 0; i < len; ++i) sent.words.push_back("t" + std::to_string(rng() % 40));
      total += len;
      corpus.push_back(sent);
    }
    const auto alphabet = build_alphabet(corpus);
    EXPECT_EQ(alphabet.total(), total);
    std::set<std::size_t> ranks;
    for (const auto& t : alphabet.tokens()) ranks.insert(alphabet.rank(t));
    EXPECT_EQ(ranks.size(), alphabet.size());
    EXPECT_EQ(*ranks.begin(), 1u);
    EXPECT_EQ(*ranks.rbegin(), alphabet.size());
    for (std::size_t r = 1; r < alphabet.size(); ++r) {
      EXPECT_GE(alphabet.count(alphabet.token_at_rank(r)),
                alphabet.count(alphabet.token_at_rank(r + 1)));
    }
  }
}

TEST(CorpusFileTest, ParsesLabelsAndTokens) {
  std::istringstream in("1\tWhat is it?\n0\tno\n\nunlabeled words here\n");
  const auto corpus = read_corpus(in);
  ASSERT_EQ(corpus.size(), 3u);
  EXPECT_EQ(corpus[0], S({"what", "is", "it"}, 1));
  EXPECT_EQ(corpus[1], S({"no"}, 0));
  EXPECT_EQ(corpus[2].label, std::nullopt);

  std::ostringstream out;
  write_corpus(out, corpus);
  std::istringstream again(out.str());
  EXPECT_EQ(read_corpus(again), corpus);
}

TEST(CorpusFileTest, RejectsNegativeOrNonNumericLabels) {
  std::istringstream bad("x\tfoo\n");
  EXPECT_THROW(read_corpus(bad), Error);
  std::istringstream negative("0\tok\n-1\tfoo\n");
  try {
    read_corpus(negative);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

class EmbeddingTest : public ::testing::Test {
 protected:
  Alphabet alphabet_ = build_alphabet(std::vector<Sentence>{S({"a", "b", "c", "d"})});
};

TEST_F(EmbeddingTest, ParsesVectors) {
  std::istringstream in("a 1.0 0.0\nb 0.0 1.0\n");
  const auto loaded = load_embeddings(in, alphabet_);
  EXPECT_EQ(loaded.table.dim(), 2u);
  EXPECT_EQ(loaded.table.size(), 2u);
  EXPECT_DOUBLE_EQ(loaded.table.vector("b")[1], 1.0);
}

TEST_F(EmbeddingTest, MissingTokensAreReportedNotFatal) {
  std::istringstream in("a 1 0\nzzz 3 3\n");
  const auto loaded = load_embeddings(in, alphabet_);
  EXPECT_EQ(loaded.report.file_tokens, 2u);
  EXPECT_EQ(loaded.report.matched, 1u);
  EXPECT_EQ(loaded.report.missing, (std::vector<std::string>{"b", "c", "d"}));
}

TEST_F(EmbeddingTest, DuplicateLineLastWinsWithWarning) {
  std::istringstream in("a 1 0\nb 0 1\na 5 5\n");
  const auto loaded = load_embeddings(in, alphabet_);
  EXPECT_DOUBLE_EQ(loaded.table.vector("a")[0], 5.0);
  ASSERT_EQ(loaded.report.warnings.size(), 1u);
  EXPECT_NE(loaded.report.warnings[0].find("line 3"), std::string::npos);
}

TEST_F(EmbeddingTest, MalformedLineReportsLineNumber) {
  std::istringstream in("a 1 0\nb 0 x1\n");
  try {
    load_embeddings(in, alphabet_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream dims("a 1 0\nb 0 1 2\n");
  EXPECT_THROW(load_embeddings(dims, alphabet_), Error);
  std::istringstream empty_vec("a\n");
  EXPECT_THROW(load_embeddings(empty_vec, alphabet_), Error);
}

TEST_F(EmbeddingTest, SynonymsAreNearestFirst) {
  std::istringstream in("a 0 0\nb 1 0\nc 3 0\n");
  const auto table = load_embeddings(in, alphabet_).table;
  EXPECT_EQ(synonyms(table, "a", 1), (std::vector<std::string>{"b"}));
  EXPECT_EQ(synonyms(table, "a", 2), (std::vector<std::string>{"b", "c"}));
}

TEST_F(EmbeddingTest, SynonymTiesGoToLowerRank) {
  // c and b are equidistant from a; b has the lower rank.
  std::istringstream in("c 0 -1\na 0 0\nb 0 1\n");
  const auto table = load_embeddings(in, alphabet_).table;
  EXPECT_EQ(synonyms(table, "a", 1), (std::vector<std::string>{"b"}));
}

TEST_F(EmbeddingTest, SynonymErrors) {
  std::istringstream in("a 0 0\nb 1 0\n");
  const auto table = load_embeddings(in, alphabet_).table;
  EXPECT_THROW(synonyms(table, "c", 1), Error);
  EXPECT_THROW(synonyms(table, "a", 2), Error);  // k must be below vocabulary size
}

// Exactly k results, never the query, invariant under translation.
TEST(SynonymPropertyTest, SizeExclusionAndTranslationInvariance) {
  std::mt19937_64 rng(11);
  std::vector<std::string> tokens;
  for (int i = 0; i < 30; ++i) tokens.push_back("t" + std::to_string(i));
  for (int trial = 0; trial < 20; ++trial) {
    Matrix v(30, 3);
    Matrix shifted(30, 3);
    const double offset[3] = {double(rng() % 50) - 25, double(rng() % 50) - 25,
                              double(rng() % 50) - 25};
    for (int i = 0; i < 30; ++i) {
      for (int d = 0; d < 3; ++d) {
        v(i, d) = double(rng() % 9);  // small integers: exact arithmetic, real ties
        shifted(i, d) = v(i, d) + offset[d];
      }
    }
    const auto a = EmbeddingTable::from_rows(tokens, v);
    const auto b = EmbeddingTable::from_rows(tokens, shifted);
    for (std::size_t k : {1u, 5u, 29u}) {
      const auto& q = tokens[rng() % 30];
      const auto syn = synonyms(a, q, k);
      EXPECT_EQ(syn.size(), k);
      EXPECT_EQ(std::count(syn.begin(), syn.end(), q), 0);
      EXPECT_EQ(syn, synonyms(b, q, k));
    }
  }
}

}  // namespace
}  // namespace wfax
