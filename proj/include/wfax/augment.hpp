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

// Synonym replacement and dropout augmentation of a training corpus.

#pragma once

#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wfax/common.hpp"
#include "wfax/corpus.hpp"

namespace wfax {

struct AugmentConfig {
  std::size_t epochs = 0;      // generated copies per original sentence
  std::size_t synonym_k = 5;
  double dropout_prob = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (synonym_k == 0) throw Error("synonym_k must be positive");
    if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) {
      throw Error("dropout probability must lie in [0, 1]");
    }
  }
};

// The rank-i word is replaced with probability 1/(i+1).
inline double replace_probability(std::int64_t rank) {
  if (rank < 1) throw Error("rank must be >= 1");
  return 1.0 / static_cast<double>(rank + 1);
}

// Precomputed top-k synonym lists for every token that has an embedding. When
// the table is too small for k, lists are truncated to size()-1.
class SynonymIndex {
 public:
  SynonymIndex() = default;

  SynonymIndex(const EmbeddingTable& table, std::size_t k, std::size_t threads = 1) {
    if (table.size() < 2) return;
    const std::size_t effective = std::min(k, table.size() - 1);
    std::vector<std::vector<std::string>> lists(table.size());
    parallel_for(table.size(), threads, [&](std::size_t i) {
      lists[i] = synonyms(table, table.tokens()[i], effective);
    });
    for (std::size_t i = 0; i < table.size(); ++i) {
      lists_.emplace(table.tokens()[i], std::move(lists[i]));
    }
  }

  // nullptr when the token has no embedding.
  const std::vector<std::string>* find(const std::string& token) const {
    auto it = lists_.find(token);
    return it == lists_.end() ? nullptr : &it->second;
  }

  bool empty() const { return lists_.empty(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> lists_;
};

// One augmented copy of `s`. Per word: replace by a uniformly chosen synonym
// with probability 1/(rank+1); otherwise drop to <unk> with dropout_prob;
// otherwise keep. Words outside the alphabet, <unk> itself, and words without
// an embedding skip the synonym stage.
//
// Draw order per word is fixed: one uniform for the synonym stage (only when
// the word has synonyms), one index draw if replaced, else one uniform for
// dropout.
template <typename Engine>
Sentence augment_sentence(const Sentence& s, const Alphabet& alphabet,
                          const SynonymIndex& index, const AugmentConfig& cfg,
                          Engine& engine) {
  Sentence out;
  out.label = s.label;
  out.words.reserve(s.words.size());
  for (const auto& w : s.words) {
    const std::vector<std::string>* candidates = nullptr;
    if (w != kUnkToken) {
      if (auto idx = alphabet.index_of(w)) {
        candidates = index.find(w);
        if (candidates && !candidates->empty()) {
          const double p = replace_probability(static_cast<std::int64_t>(*idx + 1));
          if (uniform01(engine) < p) {
            out.words.push_back((*candidates)[uniform_index(engine, candidates->size())]);
            continue;
          }
        }
      }
    }
    if (uniform01(engine) < cfg.dropout_prob) {
      out.words.emplace_back(kUnkToken);
    } else {
      out.words.push_back(w);
    }
  }
  return out;
}

// D = D0 followed by `epochs` rounds of generated variants (epoch-major). The
// stream for (epoch e, sentence i) is seeded from (seed, e, i), so the result
// does not depend on thread scheduling.
inline std::vector<Sentence> augment_dataset(std::span<const Sentence> d0,
                                             const Alphabet& alphabet,
                                             const SynonymIndex& index,
                                             const AugmentConfig& cfg,
                                             std::size_t threads = 1) {
  cfg.validate();
  std::vector<Sentence> out(d0.begin(), d0.end());
  out.resize(d0.size() * (cfg.epochs + 1));
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const std::uint64_t epoch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(e));
    parallel_for(d0.size(), threads, [&](std::size_t i) {
      std::mt19937_64 engine(derive_seed(epoch_seed, static_cast<std::uint64_t>(i)));
      out[e * d0.size() + i] = augment_sentence(d0[i], alphabet, index, cfg, engine);
    });
  }
  return out;
}

inline std::vector<Sentence> augment_dataset(std::span<const Sentence> d0,
                                             const Alphabet& alphabet,
                                             const EmbeddingTable& table,
                                             const AugmentConfig& cfg,
                                             std::size_t threads = 1) {
  cfg.validate();
  const SynonymIndex index(table, cfg.synonym_k, threads);
  return augment_dataset(d0, alphabet, index, cfg, threads);
}

}  // namespace wfax
