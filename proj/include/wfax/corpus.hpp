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

// Alphabet, tokenized corpora and word embeddings.

#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wfax/common.hpp"

namespace wfax {

inline constexpr std::string_view kUnkToken = "<unk>";

struct Sentence {
  std::vector<std::string> words;
  std::optional<int> label;

  bool operator==(const Sentence&) const = default;
};

// Whitespace split, ASCII lowercase, punctuation stripped at word boundaries.
// The reserved token <unk> passes through untouched.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (begin == i) break;
    std::string_view word = text.substr(begin, i - begin);
    if (word == kUnkToken) {
      out.emplace_back(word);
      continue;
    }
    while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.front()))) {
      word.remove_prefix(1);
    }
    while (!word.empty() && std::ispunct(static_cast<unsigned char>(word.back()))) {
      word.remove_suffix(1);
    }
    if (word.empty()) continue;
    std::string token(word);
    for (char& c : token) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    out.push_back(std::move(token));
  }
  return out;
}

// Σ with occurrence counts and frequency ranks. Tokens are stored in rank order
// (descending count, ties by first occurrence), so rank(t) = position + 1.
class Alphabet {
 public:
  Alphabet() = default;

  static Alphabet build(std::span<const Sentence> sentences) {
    if (sentences.empty()) throw Error("empty corpus");
    std::vector<std::string> order;
    std::vector<std::int64_t> counts;
    std::unordered_map<std::string, std::size_t> first_seen;
    for (const auto& s : sentences) {
      for (const auto& w : s.words) {
        auto [it, inserted] = first_seen.try_emplace(w, order.size());
        if (inserted) {
          order.push_back(w);
          counts.push_back(0);
        }
        ++counts[it->second];
      }
    }
    if (order.empty()) throw Error("empty corpus");
    std::vector<std::size_t> perm(order.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    Alphabet out;
    for (std::size_t p : perm) out.push(std::move(order[p]), counts[p]);
    return out;
  }

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }

  std::optional<std::size_t> index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // 1 = most frequent.
  std::size_t rank(std::string_view token) const {
    auto idx = index_of(token);
    if (!idx) throw Error("token not in alphabet: " + std::string(token));
    return *idx + 1;
  }

  std::int64_t count(std::string_view token) const {
    auto idx = index_of(token);
    return idx ? counts_[*idx] : 0;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  const std::string& token_at_rank(std::size_t rank) const { return tokens_.at(rank - 1); }

  // Total word count N.
  std::int64_t total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
  }

  // Adds <unk> (count 0, last rank) when absent.
  void ensure_unknown() {
    if (!contains(kUnkToken)) push(std::string(kUnkToken), 0);
  }

 private:
  void push(std::string token, std::int64_t count) {
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    counts_.push_back(count);
  }

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline Alphabet build_alphabet(std::span<const Sentence> sentences) {
  return Alphabet::build(sentences);
}

// ---------------------------------------------------------------------------
// Corpus file: one sentence per line, "<label>\t<token token ...>". A line
// without a tab is an unlabeled sentence. Lines with no tokens are skipped.

inline std::vector<Sentence> read_corpus(std::istream& in) {
  std::vector<Sentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Sentence s;
    std::string_view body = line;
    if (auto tab = body.find('\t'); tab != std::string_view::npos) {
      std::string_view label = body.substr(0, tab);
      int value = -1;
      auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
      if (ec != std::errc() || ptr != label.data() + label.size() || value < 0) {
        throw Error("corpus line " + std::to_string(line_no) + ": invalid label '" +
                    std::string(label) + "'");
      }
      s.label = value;
      body.remove_prefix(tab + 1);
    }
    s.words = tokenize(body);
    if (!s.words.empty()) out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sentence> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, std::span<const Sentence> sentences) {
  for (const auto& s : sentences) {
    if (s.label) out << *s.label << '\t';
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      if (i) out << ' ';
      out << s.words[i];
    }
    out << '\n';
  }
}

inline void write_corpus(const std::string& path, std::span<const Sentence> sentences) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file: " + path);
  write_corpus(out, sentences);
  if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Word embeddings.

struct EmbeddingReport {
  std::size_t file_tokens = 0;             // distinct tokens in the file
  std::size_t matched = 0;                 // tokens also in the alphabet
  std::vector<std::string> missing;        // alphabet tokens without a vector
  std::vector<std::string> warnings;
};

// Vectors for alphabet tokens, stored in alphabet-rank order so that distance
// ties resolve by rank.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  std::size_t dim() const { return static_cast<std::size_t>(vectors_.cols()); }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  RowVector vector(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) throw Error("no embedding for '" + std::string(token) + "'");
    return vectors_.row(static_cast<Eigen::Index>(it->second));
  }

  const Matrix& vectors() const { return vectors_; }

  // `tokens` must already be in ascending alphabet rank.
  static EmbeddingTable from_rows(std::vector<std::string> tokens, Matrix vectors) {
    if (static_cast<Eigen::Index>(tokens.size()) != vectors.rows()) {
      throw Error("embedding rows do not match token count");
    }
    EmbeddingTable t;
    t.tokens_ = std::move(tokens);
    t.vectors_ = std::move(vectors);
    for (std::size_t i = 0; i < t.tokens_.size(); ++i) t.index_.emplace(t.tokens_[i], i);
    return t;
  }

 private:
  std::vector<std::string> tokens_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadedEmbeddings {
  EmbeddingTable table;
  EmbeddingReport report;
};

inline LoadedEmbeddings load_embeddings(std::istream& in, const Alphabet& alphabet) {
  std::unordered_map<std::string, std::vector<double>> found;
  std::unordered_map<std::string, std::size_t> seen_at;
  EmbeddingReport report;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error("embedding line " + std::to_string(line_no) + ": malformed value '" +
                    field + "'");
      }
      values.push_back(v);
    }
    if (values.empty()) {
      throw Error("embedding line " + std::to_string(line_no) + ": no vector values");
    }
    if (dim == 0) {
      dim = values.size();
    } else if (values.size() != dim) {
      throw Error("embedding line " + std::to_string(line_no) + ": dimension " +
                  std::to_string(values.size()) + " != " + std::to_string(dim));
    }
    if (auto [it, inserted] = seen_at.try_emplace(token, line_no); !inserted) {
      report.warnings.push_back("duplicate embedding for '" + token + "' at line " +
                                std::to_string(line_no) + " (first at line " +
                                std::to_string(it->second) + "); last occurrence wins");
      it->second = line_no;
    }
    if (alphabet.contains(token)) found[token] = std::move(values);
  }
  report.file_tokens = seen_at.size();

  std::vector<std::string> tokens;
  for (const auto& t : alphabet.tokens()) {
    if (found.contains(t)) {
      tokens.push_back(t);
    } else {
      report.missing.push_back(t);
    }
  }
  report.matched = tokens.size();
  Matrix vectors(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& v = found[tokens[i]];
    for (std::size_t d = 0; d < dim; ++d) {
      vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v[d];
    }
  }
  return {EmbeddingTable::from_rows(std::move(tokens), std::move(vectors)), std::move(report)};
}

inline LoadedEmbeddings load_embeddings(const std::string& path, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file: " + path);
  return load_embeddings(in, alphabet);
}

// The k nearest tokens to `token` by Euclidean distance, excluding the token
// itself. Ties resolve by alphabet rank.
inline std::vector<std::string> synonyms(const EmbeddingTable& table, std::string_view token,
                                         std::size_t k) {
  if (!table.contains(token)) throw Error("no embedding for '" + std::string(token) + "'");
  if (k == 0 || k >= table.size()) {
    throw Error("synonym count " + std::to_string(k) + " must be in [1, " +
                std::to_string(table.size()) + ")");
  }
  const RowVector query = table.vector(token);
  const Matrix& vs = table.vectors();
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.tokens()[i] == token) continue;
    scored.emplace_back((vs.row(static_cast<Eigen::Index>(i)) - query).squaredNorm(), i);
  }
  // Pairs compare by distance, then by row index, which is rank order.
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end());
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(table.tokens()[scored[i].second]);
  return out;
}

}  // namespace wfax
