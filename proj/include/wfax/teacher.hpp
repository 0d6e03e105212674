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

// Black-box sequence classifiers and their per-prefix output traces.
//
// The extractor only ever sees traces. A trace file (JSON Lines) is the
// boundary to real neural models; SyntheticTeacher is a built-in stand-in
// whose outputs are belief states of a hidden-state machine read through an
// emission matrix.

#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfax/common.hpp"
#include "wfax/corpus.hpp"

namespace wfax {

using json = nlohmann::json;

// A point on the label simplex.
using ProbOutput = RowVector;

struct Trace {
  Sentence sentence;
  std::vector<ProbOutput> outputs;  // outputs[i] = model output after words[0..i]
};

// Teacher label of a trace: argmax of the last output.
inline std::size_t trace_label(const Trace& t) {
  if (t.outputs.empty()) throw Error("trace has no outputs");
  return argmax(t.outputs.back());
}

class SyntheticTeacher {
 public:
  SyntheticTeacher() = default;

  SyntheticTeacher(RowVector start, Matrix emit, std::map<std::string, Matrix> trans)
      : start_(std::move(start)), emit_(std::move(emit)), trans_(std::move(trans)) {
    validate();
  }

  std::size_t hidden_states() const { return static_cast<std::size_t>(start_.size()); }
  std::size_t labels() const { return static_cast<std::size_t>(emit_.cols()); }
  const RowVector& start() const { return start_; }
  const Matrix& emit() const { return emit_; }
  const std::map<std::string, Matrix>& transitions() const { return trans_; }

  // Falls back to the <unk> matrix for unknown words.
  const Matrix& transition(const std::string& token) const {
    auto it = trans_.find(token);
    if (it == trans_.end()) it = trans_.find(std::string(kUnkToken));
    if (it == trans_.end()) {
      throw Error("teacher has no matrix for '" + token + "' and no <unk> matrix");
    }
    return it->second;
  }

  void validate() const {
    constexpr double kTol = 1e-9;
    const auto h = start_.size();
    if (h == 0) throw Error("teacher needs at least one hidden state");
    if (!is_distribution(start_, kTol)) throw Error("teacher start is not a distribution");
    if (emit_.rows() != h || emit_.cols() < 1) throw Error("teacher emit has wrong shape");
    for (Eigen::Index r = 0; r < emit_.rows(); ++r) {
      if (!is_distribution(emit_.row(r), kTol)) throw Error("teacher emit row not stochastic");
    }
    for (const auto& [token, m] : trans_) {
      if (m.rows() != h || m.cols() != h) {
        throw Error("teacher matrix for '" + token + "' has wrong shape");
      }
      for (Eigen::Index r = 0; r < h; ++r) {
        if (!is_distribution(m.row(r), kTol)) {
          throw Error("teacher matrix for '" + token + "' is not row-stochastic");
        }
      }
    }
  }

  json to_json() const {
    json j;
    j["hidden_states"] = hidden_states();
    j["labels"] = labels();
    j["start"] = row_to_json(start_);
    j["emit"] = matrix_to_json(emit_);
    json trans = json::object();
    for (const auto& [token, m] : trans_) trans[token] = matrix_to_json(m);
    j["transitions"] = std::move(trans);
    return j;
  }

  static SyntheticTeacher from_json(const json& j) {
    try {
      RowVector start = row_from_json(j.at("start"));
      Matrix emit = matrix_from_json(j.at("emit"));
      std::map<std::string, Matrix> trans;
      for (const auto& [token, m] : j.at("transitions").items()) {
        trans.emplace(token, matrix_from_json(m));
      }
      return SyntheticTeacher(std::move(start), std::move(emit), std::move(trans));
    } catch (const json::exception& e) {
      throw Error(std::string("invalid teacher file: ") + e.what());
    }
  }

  static SyntheticTeacher load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open teacher file: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error("invalid teacher file " + path + ": " + e.what());
    }
    return from_json(j);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write teacher file: " + path);
    out << to_json().dump() << '\n';
  }

  static json row_to_json(const RowVector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
  }

  static json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(row_to_json(m.row(r)));
    return rows;
  }

  static RowVector row_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  static Matrix matrix_from_json(const json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const auto cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols) throw Error("ragged matrix");
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
    }
    return m;
  }

 private:
  RowVector start_;
  Matrix emit_;
  std::map<std::string, Matrix> trans_;
};

inline Trace run_trace(const SyntheticTeacher& teacher, const Sentence& s) {
  Trace t;
  t.sentence = s;
  t.outputs.reserve(s.words.size());
  RowVector belief = teacher.start();
  for (const auto& w : s.words) {
    belief = belief * teacher.transition(w);
    const double z = belief.sum();
    if (!(z > 0.0)) throw Error("teacher belief vanished on '" + w + "'");
    belief /= z;
    ProbOutput o = belief * teacher.emit();
    o /= o.sum();
    t.outputs.push_back(std::move(o));
  }
  return t;
}

inline std::vector<Trace> run_traces(const SyntheticTeacher& teacher,
                                     std::span<const Sentence> sentences,
                                     std::size_t threads = 1) {
  std::vector<Trace> out(sentences.size());
  parallel_for(sentences.size(), threads,
               [&](std::size_t i) { out[i] = run_trace(teacher, sentences[i]); });
  return out;
}

inline std::size_t teacher_predict(const SyntheticTeacher& teacher, const Sentence& s) {
  if (s.words.empty()) throw Error("empty sentence");
  return trace_label(run_trace(teacher, s));
}

namespace detail {

template <typename Engine>
RowVector sample_dirichlet(std::size_t n, double concentration, Engine& engine) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  RowVector v(static_cast<Eigen::Index>(n));
  for (;;) {
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = gamma(engine);
    const double z = v.sum();
    if (z > 0.0) return v / z;
  }
}

template <typename Engine>
Matrix sample_stochastic(std::size_t rows, std::size_t cols, double concentration,
                         Engine& engine) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    m.row(static_cast<Eigen::Index>(r)) = sample_dirichlet(cols, concentration, engine);
  }
  return m;
}

}  // namespace detail

// Random teacher over `alphabet` plus <unk>. Every row is Dirichlet(0.5).
inline SyntheticTeacher sample_teacher(const Alphabet& alphabet, std::size_t hidden,
                                       std::size_t labels, std::uint64_t seed) {
  if (hidden < 1) throw Error("teacher needs at least one hidden state");
  if (labels < 2) throw Error("teacher needs at least two labels");
  constexpr double kConcentration = 0.5;
  std::mt19937_64 engine(splitmix64(seed));
  RowVector start = detail::sample_dirichlet(hidden, kConcentration, engine);
  Matrix emit = detail::sample_stochastic(hidden, labels, kConcentration, engine);
  std::map<std::string, Matrix> trans;
  for (const auto& token : alphabet.tokens()) {
    trans.emplace(token, detail::sample_stochastic(hidden, hidden, kConcentration, engine));
  }
  if (!trans.contains(std::string(kUnkToken))) {
    trans.emplace(std::string(kUnkToken),
                  detail::sample_stochastic(hidden, hidden, kConcentration, engine));
  }
  return SyntheticTeacher(std::move(start), std::move(emit), std::move(trans));
}

// ---------------------------------------------------------------------------
// Trace files: JSON Lines, one record per sentence:
//   {"tokens": [...], "label": <int>, "outputs": [[p1..pm], ...]}
// "label" may be absent for unlabeled sentences.

inline json trace_to_json(const Trace& t) {
  json j;
  j["tokens"] = t.sentence.words;
  if (t.sentence.label) j["label"] = *t.sentence.label;
  json outs = json::array();
  for (const auto& o : t.outputs) outs.push_back(SyntheticTeacher::row_to_json(o));
  j["outputs"] = std::move(outs);
  return j;
}

inline void write_traces(std::ostream& out, std::span<const Trace> traces) {
  for (const auto& t : traces) out << trace_to_json(t).dump() << '\n';
}

inline void write_traces(const std::string& path, std::span<const Trace> traces) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file: " + path);
  write_traces(out, traces);
  if (!out) throw Error("write failed: " + path);
}

inline constexpr double kTraceRowTolerance = 1e-4;

inline std::vector<Trace> read_traces(std::istream& in) {
  std::vector<Trace> out;
  std::string line;
  std::size_t record = 0;
  std::size_t labels = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    auto fail = [&](const std::string& what) -> Error {
      return Error("trace record " + std::to_string(record) + ": " + what);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw fail("record is not an object");
    if (!j.contains("tokens") || !j["tokens"].is_array()) throw fail("missing 'tokens' array");
    if (!j.contains("outputs") || !j["outputs"].is_array()) {
      throw fail("missing 'outputs' array");
    }
    Trace t;
    for (const auto& tok : j["tokens"]) {
      if (!tok.is_string() || tok.get_ref<const std::string&>().empty()) {
        throw fail("tokens must be non-empty strings");
      }
      t.sentence.words.push_back(tok.get<std::string>());
    }
    if (t.sentence.words.empty()) throw fail("empty token list");
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_number_integer() || j["label"].get<long long>() < 0) {
        throw fail("label must be a non-negative integer");
      }
      t.sentence.label = j["label"].get<int>();
    }
    const auto& outs = j["outputs"];
    if (outs.size() != t.sentence.words.size()) {
      throw fail("outputs length " + std::to_string(outs.size()) + " != tokens length " +
                 std::to_string(t.sentence.words.size()));
    }
    for (std::size_t i = 0; i < outs.size(); ++i) {
      const auto& row = outs[i];
      if (!row.is_array() || row.empty()) throw fail("output row must be a non-empty array");
      if (labels == 0) labels = row.size();
      if (row.size() != labels) {
        throw fail("output row has " + std::to_string(row.size()) + " labels, expected " +
                   std::to_string(labels));
      }
      ProbOutput o(static_cast<Eigen::Index>(row.size()));
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (!row[c].is_number()) throw fail("non-numeric probability");
        o[static_cast<Eigen::Index>(c)] = row[c].get<double>();
      }
      if (!is_distribution(o, kTraceRowTolerance)) {
        throw fail("output row " + std::to_string(i) + " is not a distribution (sum " +
                   std::to_string(o.sum()) + ")");
      }
      t.outputs.push_back(std::move(o));
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Trace> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return read_traces(in);
}

}  // namespace wfax
