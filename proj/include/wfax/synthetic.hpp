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

// Desk-scale synthetic workloads: Zipf-distributed sentences over a generated
// vocabulary, and embeddings derived from a teacher's transition matrices.

#pragma once

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "wfax/common.hpp"
#include "wfax/corpus.hpp"
#include "wfax/teacher.hpp"

namespace wfax::synthetic {

// "w001" .. "wNNN".
inline std::vector<std::string> vocabulary(std::size_t size) {
  std::vector<std::string> out;
  out.reserve(size);
  const int width = static_cast<int>(std::to_string(size).size());
  for (std::size_t i = 1; i <= size; ++i) {
    std::string digits = std::to_string(i);
    out.push_back("w" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') +
                  digits);
  }
  return out;
}

// Alphabet in which vocab[i] has rank i+1 (strictly decreasing synthetic counts).
inline Alphabet ranked_alphabet(const std::vector<std::string>& vocab) {
  std::vector<Sentence> pseudo;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    Sentence s;
    s.words.assign(vocab.size() - i, vocab[i]);
    pseudo.push_back(std::move(s));
  }
  return Alphabet::build(pseudo);
}

// Sentences whose words follow Zipf's law over `vocab` (word i has weight
// 1/(i+1)) and whose lengths are uniform in [min_len, max_len].
inline std::vector<Sentence> zipf_sentences(const std::vector<std::string>& vocab,
                                            std::size_t count, std::size_t min_len,
                                            std::size_t max_len, std::uint64_t seed) {
  if (vocab.empty()) throw Error("empty vocabulary");
  if (min_len < 1 || max_len < min_len) throw Error("invalid sentence length range");
  std::vector<double> cumulative(vocab.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    acc += 1.0 / static_cast<double>(i + 1);
    cumulative[i] = acc;
  }
  std::mt19937_64 engine(splitmix64(seed));
  std::vector<Sentence> out(count);
  for (auto& s : out) {
    const std::size_t len = min_len + uniform_index(engine, max_len - min_len + 1);
    s.words.reserve(len);
    for (std::size_t j = 0; j < len; ++j) {
      const double u = uniform01(engine) * acc;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const auto idx = std::min<std::size_t>(
          static_cast<std::size_t>(it - cumulative.begin()), vocab.size() - 1);
      s.words.push_back(vocab[idx]);
    }
  }
  return out;
}

// Replaces each word by a fresh out-of-vocabulary token with probability `rate`.
inline std::vector<Sentence> inject_oov(std::vector<Sentence> sentences, double rate,
                                        std::uint64_t seed) {
  std::mt19937_64 engine(splitmix64(seed));
  std::size_t fresh = 0;
  for (auto& s : sentences) {
    for (auto& w : s.words) {
      if (uniform01(engine) < rate) w = "oov" + std::to_string(fresh++);
    }
  }
  return sentences;
}

// Row-major flattening of each token's hidden-state transition matrix. Words
// the teacher treats alike end up close, which gives synonym replacement a
// behavioural notion of similarity.
inline EmbeddingTable behavioural_embeddings(const SyntheticTeacher& teacher,
                                             const Alphabet& alphabet) {
  const auto h = static_cast<Eigen::Index>(teacher.hidden_states());
  std::vector<std::string> tokens;
  for (const auto& t : alphabet.tokens()) {
    if (t != kUnkToken && teacher.transitions().contains(t)) tokens.push_back(t);
  }
  Matrix vectors(static_cast<Eigen::Index>(tokens.size()), h * h);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Matrix& m = teacher.transitions().at(tokens[i]);
    vectors.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const RowVector>(m.data(), h * h);
  }
  return EmbeddingTable::from_rows(std::move(tokens), std::move(vectors));
}

}  // namespace wfax::synthetic
