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

// Running an extracted WFA: weights, predictions, consistency rate, and
// diagnostics.

#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfax/builder.hpp"
#include "wfax/common.hpp"
#include "wfax/corpus.hpp"
#include "wfax/teacher.hpp"

namespace wfax {

// f_0 = I, f_i = f_{i-1} · Ê_{w_i}. Returns f_0..f_n.
inline std::vector<RowVector> state_distributions(const Wfa& model, const Sentence& s) {
  if (s.words.empty()) throw Error("empty sentence");
  std::vector<RowVector> fs;
  fs.reserve(s.words.size() + 1);
  fs.push_back(model.initial);
  for (const auto& w : s.words) fs.push_back(fs.back() * model.matrix(w));
  return fs;
}

// I · Ê_{w_1} ··· Ê_{w_n} · F, evaluated left to right with vector-matrix
// products only.
inline RowVector weight(const Wfa& model, const Sentence& s) {
  if (s.words.empty()) throw Error("empty sentence");
  RowVector f = model.initial;
  for (const auto& w : s.words) f = f * model.matrix(w);
  return f * model.final_weights;
}

struct Prediction {
  std::size_t label = 0;
  bool degenerate = false;  // all-zero weight (possible under null fill)
};

inline Prediction predict(const Wfa& model, const Sentence& s) {
  const RowVector v = weight(model, s);
  return {argmax(v), (v.array() == 0.0).all()};
}

struct EvalCase {
  Sentence sentence;
  std::size_t teacher_label = 0;
};

// Teacher label = argmax of each trace's final output.
inline std::vector<EvalCase> eval_cases(std::span<const Trace> traces) {
  std::vector<EvalCase> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back({t.sentence, trace_label(t)});
  return out;
}

struct EvalReport {
  double consistency_rate = 0.0;
  std::size_t n_total = 0;
  std::size_t n_agree = 0;
  std::size_t n_degenerate = 0;
  // confusion[teacher][model]
  std::vector<std::vector<std::size_t>> confusion;
  double oov_rate = 0.0;

  json to_json() const {
    return {{"consistency_rate", consistency_rate}, {"n_total", n_total},
            {"n_agree", n_agree},                   {"n_degenerate", n_degenerate},
            {"confusion", confusion},               {"oov_rate", oov_rate}};
  }
};

inline EvalReport consistency_rate(const Wfa& model, std::span<const EvalCase> cases,
                                   std::size_t threads = 1) {
  if (cases.empty()) throw Error("empty test set");
  const std::size_t m = model.labels();
  std::vector<Prediction> preds(cases.size());
  std::vector<std::size_t> oov(cases.size(), 0);
  parallel_for(cases.size(), threads, [&](std::size_t i) {
    preds[i] = predict(model, cases[i].sentence);
    for (const auto& w : cases[i].sentence.words) {
      if (!model.index_of(w)) ++oov[i];
    }
  });
  EvalReport r;
  r.n_total = cases.size();
  r.confusion.assign(m, std::vector<std::size_t>(m, 0));
  std::size_t words = 0;
  std::size_t unknown = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].teacher_label >= m) {
      throw Error("teacher label " + std::to_string(cases[i].teacher_label) +
                  " outside the model's " + std::to_string(m) + " labels");
    }
    r.n_agree += preds[i].label == cases[i].teacher_label;
    r.n_degenerate += preds[i].degenerate;
    ++r.confusion[cases[i].teacher_label][preds[i].label];
    words += cases[i].sentence.words.size();
    unknown += oov[i];
  }
  r.consistency_rate = static_cast<double>(r.n_agree) / static_cast<double>(r.n_total);
  r.oov_rate = words ? static_cast<double>(unknown) / static_cast<double>(words) : 0.0;
  return r;
}

// Zipf estimate of the median per-word occurrence count: 2N / (m ln m).
inline double estimate_median_transitions(std::int64_t m, std::int64_t n) {
  if (m < 2) throw Error("alphabet size must be at least 2");
  if (n < 1) throw Error("word count must be positive");
  const auto md = static_cast<double>(m);
  return 2.0 * static_cast<double>(n) / (md * std::log(md));
}

// Checks that the identity blend spreads decisions geometrically: with
// M_i = f_{i-1} · E_{w_i} (un-blended), the recursive f_i must equal
// (1-α) Σ_{j≤i} α^{i-j} M_j + α^i I. Returns the largest elementwise gap over
// all prefixes.
inline double check_context_decay(const Wfa& model, const Sentence& s) {
  const auto fs = state_distributions(model, s);
  const double alpha = model.config.alpha;
  double worst = 0.0;
  std::vector<RowVector> decisions;
  for (std::size_t i = 1; i < fs.size(); ++i) {
    decisions.push_back(fs[i - 1] * model.base[model.resolve(s.words[i - 1])]);
    RowVector expected = std::pow(alpha, static_cast<double>(i)) * model.initial;
    for (std::size_t j = 1; j <= i; ++j) {
      expected += (1.0 - alpha) * std::pow(alpha, static_cast<double>(i - j)) * decisions[j - 1];
    }
    worst = std::max(worst, (expected - fs[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Model inspection.

struct DecileStats {
  std::size_t decile = 0;          // 1..10, 1 = most frequent tokens
  std::size_t tokens = 0;
  std::int64_t min_count = 0;
  std::int64_t max_count = 0;
  double mean_missing_fraction = 0.0;  // missing rows / (k+1)
};

struct InspectReport {
  std::vector<std::int64_t> cluster_sizes;
  std::vector<double> center_entropy;  // nats, per state 0..k
  std::vector<DecileStats> deciles;
  std::int64_t total_transitions = 0;
  double median_transitions = 0.0;
  double zipf_estimate = 0.0;          // NaN when fewer than 2 tokens
};

inline InspectReport inspect_model(const Wfa& model) {
  InspectReport r;
  r.cluster_sizes = model.states.sizes;
  for (Eigen::Index i = 0; i < model.final_weights.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index c = 0; c < model.final_weights.cols(); ++c) {
      const double p = model.final_weights(i, c);
      if (p > 0.0) h -= p * std::log(p);
    }
    r.center_entropy.push_back(h);
  }

  // Observed tokens only, in model order (descending count).
  std::vector<std::size_t> observed;
  for (std::size_t i = 0; i < model.tokens.size(); ++i) {
    if (model.stats.token_counts[i] > 0) observed.push_back(i);
  }
  std::vector<std::int64_t> counts;
  for (std::size_t i : observed) {
    counts.push_back(model.stats.token_counts[i]);
    r.total_transitions += model.stats.token_counts[i];
  }
  if (!counts.empty()) {
    std::vector<std::int64_t> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    r.median_transitions = static_cast<double>(sorted[(sorted.size() - 1) / 2] +
                                               sorted[sorted.size() / 2]) / 2.0;
  }
  r.zipf_estimate = observed.size() >= 2
                        ? estimate_median_transitions(static_cast<std::int64_t>(observed.size()),
                                                      r.total_transitions)
                        : std::nan("");
  const std::size_t n = observed.size();
  for (std::size_t d = 0; d < 10 && n > 0; ++d) {
    const std::size_t begin = d * n / 10;
    const std::size_t end = (d + 1) * n / 10;
    if (begin == end) continue;
    DecileStats s;
    s.decile = d + 1;
    s.tokens = end - begin;
    s.max_count = counts[begin];
    s.min_count = counts[end - 1];
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      acc += static_cast<double>(model.stats.missing_rows[observed[i]]) /
             static_cast<double>(model.num_states());
    }
    s.mean_missing_fraction = acc / static_cast<double>(s.tokens);
    r.deciles.push_back(s);
  }
  return r;
}

}  // namespace wfax
