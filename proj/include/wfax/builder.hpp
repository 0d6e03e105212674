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

// Transition-count accumulation and WFA construction.
//
// For each token σ the count matrix T̂_σ becomes a row-stochastic E_σ:
//
//   observed row i:  E[i,j] = T̂[i,j] / Σ_l T̂[i,l]
//   missing row i:   filled per FillStrategy; `empirical` imitates the rows of
//                    other states weighted by e^{-dist}, with probability beta,
//                    and stays put otherwise:
//                      E[i,j] = beta * Σ_k e^{-M[i,k]} T̂[k,j]
//                                    / Σ_l Σ_k e^{-M[i,k]} T̂[k,l]
//                               + (1 - beta) * [i == j]
//
// and is then blended toward the identity, Ê_σ = alpha*I + (1-alpha)*E_σ.

#pragma once

#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wfax/abstraction.hpp"
#include "wfax/common.hpp"
#include "wfax/corpus.hpp"
#include "wfax/digest.hpp"
#include "wfax/teacher.hpp"

namespace wfax {

enum class FillStrategy { kEmpirical, kUniform, kNull };

inline std::string_view to_string(FillStrategy f) {
  switch (f) {
    case FillStrategy::kEmpirical: return "empirical";
    case FillStrategy::kUniform: return "uniform";
    case FillStrategy::kNull: return "null";
  }
  return "?";
}

inline FillStrategy parse_fill_strategy(std::string_view s) {
  if (s == "empirical") return FillStrategy::kEmpirical;
  if (s == "uniform") return FillStrategy::kUniform;
  if (s == "null") return FillStrategy::kNull;
  throw Error("unknown fill strategy '" + std::string(s) + "' (empirical|uniform|null)");
}

struct BuildConfig {
  double beta = 0.3;   // reference rate
  double alpha = 0.2;  // static probability
  FillStrategy fill = FillStrategy::kEmpirical;

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error("beta must lie in [0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must lie in [0, 1]");
  }
};

// Per-token (k+1) x (k+1) transition counts. Index 0 is the initial state, so
// column 0 stays zero.
class CountMatrices {
 public:
  explicit CountMatrices(std::size_t num_states = 0)
      : n_(num_states),
        zero_(CountMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_))) {}

  std::size_t num_states() const { return n_; }

  void add(std::size_t from, const std::string& token, std::size_t to, std::int64_t n = 1) {
    if (from >= n_ || to >= n_) {
      throw Error("transition (" + std::to_string(from) + ", " + token + ", " +
                  std::to_string(to) + ") out of range for " + std::to_string(n_) + " states");
    }
    if (to == 0) throw Error("no transition may enter the initial state");
    auto [it, inserted] = index_.try_emplace(token, tokens_.size());
    if (inserted) {
      tokens_.push_back(token);
      mats_.push_back(zero_);
    }
    mats_[it->second](static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) += n;
  }

  void add(const Transition& t) { add(t.from, t.token, t.to); }

  // All-zero matrix for tokens never observed.
  const CountMatrix& at(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? zero_ : mats_[it->second];
  }

  bool contains(const std::string& token) const { return index_.contains(token); }

  // Tokens in first-observation order.
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::int64_t token_total(const std::string& token) const { return at(token).sum(); }

  std::int64_t total() const {
    std::int64_t s = 0;
    for (const auto& m : mats_) s += m.sum();
    return s;
  }

  // Order-independent content digest (tokens sorted).
  std::string digest() const {
    std::vector<std::size_t> order(tokens_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return tokens_[a] < tokens_[b]; });
    Sha256 h;
    h.update_pod(static_cast<std::uint64_t>(n_));
    for (std::size_t i : order) {
      h.update(tokens_[i]).update_pod('\0');
      h.update(mats_[i].data(), sizeof(std::int64_t) * static_cast<std::size_t>(mats_[i].size()));
    }
    return h.hex();
  }

 private:
  std::size_t n_;
  CountMatrix zero_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<CountMatrix> mats_;
};

inline CountMatrices count_transitions(std::span<const Transition> transitions, std::size_t k) {
  CountMatrices counts(k + 1);
  for (const auto& t : transitions) counts.add(t);
  return counts;
}

// Abstracts every trace (in parallel) and merges the counts in trace order.
inline CountMatrices count_transitions(const AbstractStateSet& states,
                                       std::span<const Trace> traces, std::size_t threads = 1) {
  std::vector<std::vector<Transition>> per_trace(traces.size());
  parallel_for(traces.size(), threads, [&](std::size_t i) {
    per_trace[i] = trace_to_transitions(states, traces[i]);
  });
  CountMatrices counts(states.num_states());
  for (const auto& ts : per_trace) {
    for (const auto& t : ts) counts.add(t);
  }
  return counts;
}

// Builds E_σ from T̂_σ. The softmin weights e^{-M} are computed once per
// distance matrix and shared by every token.
class TransitionRule {
 public:
  TransitionRule(const Matrix& distance, double beta, FillStrategy fill)
      : softmin_((-distance.array()).exp().matrix()), beta_(beta), fill_(fill) {
    if (distance.rows() != distance.cols()) throw Error("distance matrix must be square");
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error("beta must lie in [0, 1]");
  }

  TransitionRule(const Matrix& distance, const BuildConfig& cfg)
      : TransitionRule(distance, cfg.beta, cfg.fill) {}

  Matrix operator()(const CountMatrix& counts) const {
    const auto n = counts.rows();
    if (counts.cols() != n || n != softmin_.rows()) {
      throw Error("count matrix shape does not match the distance matrix");
    }
    const Matrix c = counts.cast<double>();
    const bool all_zero = (counts.array() == 0).all();
    Matrix e = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double row_sum = c.row(i).sum();
      if (row_sum > 0.0) {
        e.row(i) = c.row(i) / row_sum;
        continue;
      }
      switch (fill_) {
        case FillStrategy::kNull:
          break;
        case FillStrategy::kUniform:
          e.row(i).setConstant(1.0 / static_cast<double>(n));
          break;
        case FillStrategy::kEmpirical: {
          if (all_zero) {
            e(i, i) = 1.0;
            break;
          }
          const RowVector reference = softmin_.row(i) * c;
          const double z = reference.sum();
          if (!(z > 0.0)) {
            e(i, i) = 1.0;
            break;
          }
          e.row(i) = beta_ * reference / z;
          e(i, i) += 1.0 - beta_;
          break;
        }
      }
    }
    return e;
  }

 private:
  Matrix softmin_;
  double beta_;
  FillStrategy fill_;
};

inline Matrix build_transition_matrix(const CountMatrix& counts, const Matrix& distance,
                                      const BuildConfig& cfg) {
  return TransitionRule(distance, cfg)(counts);
}

// Ê = alpha*I + (1-alpha)*E.
inline Matrix enhance_context(const Matrix& e, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must lie in [0, 1]");
  if (e.rows() != e.cols()) throw Error("transition matrix must be square");
  Matrix out = (1.0 - alpha) * e;
  out.diagonal().array() += alpha;
  return out;
}

struct ModelStats {
  std::vector<std::int64_t> token_counts;  // transitions observed per model token
  std::vector<std::int64_t> missing_rows;  // rows of T̂_σ with zero sum
  std::string counts_digest;
};

// The extracted automaton. tokens[i] owns matrices[i] (Ê) and base[i] (E).
// Tokens are ordered by descending transition count; <unk> is always present.
struct Wfa {
  AbstractStateSet states;
  BuildConfig config;
  std::vector<std::string> tokens;
  std::vector<Matrix> matrices;
  std::vector<Matrix> base;
  RowVector initial;
  Matrix final_weights;  // (k+1) x m, row i = center of state i
  ModelStats stats;

  std::size_t num_states() const { return states.num_states(); }
  std::size_t labels() const { return static_cast<std::size_t>(final_weights.cols()); }

  std::optional<std::size_t> index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Model index for a token; unknown tokens map to <unk>.
  std::size_t resolve(const std::string& token) const {
    if (auto i = index_of(token)) return *i;
    return *index_of(std::string(kUnkToken));
  }

  const Matrix& matrix(const std::string& token) const { return matrices[resolve(token)]; }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) index_.emplace(tokens[i], i);
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Builds every matrix for the tokens in `counts` (plus <unk>) under `cfg`,
// reusing a fitted state set. Lets callers sweep configurations without
// re-clustering.
inline Wfa assemble_wfa(const AbstractStateSet& states, const CountMatrices& counts,
                        const BuildConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  if (counts.num_states() != states.num_states()) {
    throw Error("count matrices and state set disagree on the number of states");
  }
  Wfa w;
  w.states = states;
  w.config = cfg;

  std::vector<std::size_t> order(counts.tokens().size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::int64_t> totals(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) totals[i] = counts.token_total(counts.tokens()[i]);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return totals[a] > totals[b]; });
  for (std::size_t i : order) w.tokens.push_back(counts.tokens()[i]);
  if (!counts.contains(std::string(kUnkToken))) w.tokens.emplace_back(kUnkToken);
  w.reindex();

  const TransitionRule rule(states.distance, cfg);
  const std::size_t n = w.tokens.size();
  w.matrices.resize(n);
  w.base.resize(n);
  w.stats.token_counts.resize(n);
  w.stats.missing_rows.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const CountMatrix& c = counts.at(w.tokens[i]);
    w.base[i] = rule(c);
    w.matrices[i] = enhance_context(w.base[i], cfg.alpha);
    w.stats.token_counts[i] = c.sum();
    w.stats.missing_rows[i] = (c.rowwise().sum().array() == 0).count();
  });
  w.stats.counts_digest = counts.digest();

  w.initial = RowVector::Zero(static_cast<Eigen::Index>(states.num_states()));
  w.initial[0] = 1.0;
  w.final_weights = states.centers;
  return w;
}

inline Wfa build_wfa(std::span<const Trace> traces, std::size_t k, const BuildConfig& cfg,
                     std::uint64_t seed, std::size_t threads = 1) {
  if (traces.empty()) throw Error("no traces to extract from");
  cfg.validate();
  const AbstractStateSet states = fit_states(stack_outputs(traces), k, seed, {}, threads);
  const CountMatrices counts = count_transitions(states, traces, threads);
  return assemble_wfa(states, counts, cfg, threads);
}

// ---------------------------------------------------------------------------
// Model serialization.

inline constexpr std::string_view kModelFormat = "wfax-model";
inline constexpr int kModelVersion = 1;

inline json model_to_json(const Wfa& w) {
  const auto n = static_cast<Eigen::Index>(w.num_states());
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["k"] = w.states.k;
  j["m"] = w.states.m;
  j["alpha"] = w.config.alpha;
  j["beta"] = w.config.beta;
  j["fill_strategy"] = to_string(w.config.fill);
  j["centers"] = SyntheticTeacher::matrix_to_json(w.states.centers);
  j["centroids"] = SyntheticTeacher::matrix_to_json(w.states.centroids);
  j["initial"] = SyntheticTeacher::row_to_json(w.initial);
  json alphabet = json::object();
  json matrices = json::object();
  json token_counts = json::object();
  json missing = json::object();
  for (std::size_t i = 0; i < w.tokens.size(); ++i) {
    alphabet[w.tokens[i]] = i;
    const Matrix& m = w.matrices[i];
    matrices[w.tokens[i]] = std::vector<double>(m.data(), m.data() + n * n);
    token_counts[w.tokens[i]] = w.stats.token_counts[i];
    missing[w.tokens[i]] = w.stats.missing_rows[i];
  }
  j["alphabet"] = std::move(alphabet);
  j["matrices"] = std::move(matrices);
  j["stats"] = {{"cluster_sizes", w.states.sizes},
                {"token_counts", std::move(token_counts)},
                {"missing_rows", std::move(missing)},
                {"counts_digest", w.stats.counts_digest}};
  return j;
}

inline Wfa model_from_json(const json& j) {
  try {
    if (j.value("format", "") != kModelFormat) throw Error("not a wfax model");
    if (j.at("version").get<int>() != kModelVersion) {
      throw Error("unsupported model version " + j.at("version").dump());
    }
    Wfa w;
    w.config.alpha = j.at("alpha").get<double>();
    w.config.beta = j.at("beta").get<double>();
    w.config.fill = parse_fill_strategy(j.at("fill_strategy").get<std::string>());
    w.config.validate();
    const auto& st = j.at("stats");
    w.states = AbstractStateSet::from_parts(
        SyntheticTeacher::matrix_from_json(j.at("centroids")),
        SyntheticTeacher::matrix_from_json(j.at("centers")),
        st.at("cluster_sizes").get<std::vector<std::int64_t>>());
    if (w.states.k != j.at("k").get<std::size_t>() || w.states.m != j.at("m").get<std::size_t>()) {
      throw Error("model shape fields disagree with centers");
    }
    const auto n = static_cast<Eigen::Index>(w.num_states());
    w.initial = SyntheticTeacher::row_from_json(j.at("initial"));
    if (w.initial.size() != n) throw Error("initial vector has wrong length");
    w.final_weights = w.states.centers;

    const auto& alphabet = j.at("alphabet");
    w.tokens.assign(alphabet.size(), std::string());
    for (const auto& [token, idx] : alphabet.items()) {
      const auto i = idx.get<std::size_t>();
      if (i >= w.tokens.size() || !w.tokens[i].empty()) throw Error("alphabet indices invalid");
      w.tokens[i] = token;
    }
    w.reindex();
    if (!w.index_of(std::string(kUnkToken))) throw Error("model lacks an <unk> matrix");

    const double alpha = w.config.alpha;
    for (const auto& token : w.tokens) {
      const auto values = j.at("matrices").at(token).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != n * n) {
        throw Error("matrix for '" + token + "' has wrong size");
      }
      Matrix m = Eigen::Map<const Matrix>(values.data(), n, n);
      // E is recovered by inverting the identity blend; at alpha = 1 it is
      // unrecoverable and irrelevant, so Ê stands in.
      Matrix e = m;
      if (alpha < 1.0) {
        e.diagonal().array() -= alpha;
        e /= (1.0 - alpha);
      }
      w.base.push_back(std::move(e));
      w.matrices.push_back(std::move(m));
      w.stats.token_counts.push_back(st.at("token_counts").at(token).get<std::int64_t>());
      w.stats.missing_rows.push_back(st.at("missing_rows").at(token).get<std::int64_t>());
    }
    w.stats.counts_digest = st.value("counts_digest", "");
    return w;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const Wfa& w) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << model_to_json(w).dump() << '\n';
  if (!out) throw Error("write failed: " + path);
}

inline Wfa load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("invalid model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace wfax
