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

// End-to-end pipeline (augment -> teach -> extract -> eval), its configuration
// file, the artifact manifest, and the filling-strategy comparison sweep.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfax/augment.hpp"
#include "wfax/builder.hpp"
#include "wfax/common.hpp"
#include "wfax/corpus.hpp"
#include "wfax/digest.hpp"
#include "wfax/runtime.hpp"
#include "wfax/teacher.hpp"

namespace wfax {

namespace fs = std::filesystem;

// A failure attributed to one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> kStages = {"augment", "teach", "extract", "eval"};
  return kStages;
}

struct PipelineConfig {
  std::string corpus;
  std::string test_corpus;      // empty: evaluate on the original training corpus
  std::string embeddings;
  std::string teacher = "random";
  std::string out_dir = "wfax-out";
  std::size_t hidden_states = 8;
  std::size_t labels = 0;       // 0: one more than the largest corpus label (min 2)
  std::size_t k = 10;
  double alpha = 0.2;
  double beta = 0.3;
  FillStrategy fill = FillStrategy::kEmpirical;
  std::size_t epochs = 0;
  std::size_t synonym_k = 5;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<std::string> stages = pipeline_stages();

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> kKeys = {
        "corpus", "test_corpus", "embeddings", "teacher", "out_dir", "hidden_states",
        "labels", "k", "alpha", "beta", "fill", "epochs", "synonyms", "dropout",
        "seed", "threads", "stages"};
    return kKeys;
  }

  // Sets one key from its textual value. Unknown keys are rejected.
  void set(const std::string& key, const std::string& value) {
    auto as_size = [&] {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(value, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != value.size() || value.empty() || value.front() == '-') {
        throw Error("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
      }
      return static_cast<std::size_t>(v);
    };
    auto as_double = [&] {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != value.size() || value.empty()) {
        throw Error("config key '" + key + "' expects a number, got '" + value + "'");
      }
      return v;
    };
    if (key == "corpus") corpus = value;
    else if (key == "test_corpus") test_corpus = value;
    else if (key == "embeddings") embeddings = value;
    else if (key == "teacher") teacher = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "hidden_states") hidden_states = as_size();
    else if (key == "labels") labels = as_size();
    else if (key == "k") k = as_size();
    else if (key == "alpha") alpha = as_double();
    else if (key == "beta") beta = as_double();
    else if (key == "fill") fill = parse_fill_strategy(value);
    else if (key == "epochs") epochs = as_size();
    else if (key == "synonyms") synonym_k = as_size();
    else if (key == "dropout") dropout = as_double();
    else if (key == "seed") seed = static_cast<std::uint64_t>(as_size());
    else if (key == "threads") threads = as_size();
    else if (key == "stages") {
      stages.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) stages.push_back(item);
      }
    } else {
      throw Error("unknown config key '" + key + "'");
    }
  }

  BuildConfig build_config() const { return {beta, alpha, fill}; }

  AugmentConfig augment_config() const {
    return {epochs, synonym_k, dropout, derive_seed(seed, "augment")};
  }

  bool runs(std::string_view stage) const {
    return std::find(stages.begin(), stages.end(), stage) != stages.end();
  }

  void validate() const {
    build_config().validate();
    augment_config().validate();
    if (k == 0) throw Error("k must be positive");
    if (hidden_states == 0) throw Error("hidden_states must be positive");
    if (labels == 1) throw Error("labels must be at least 2");
    if (stages.empty()) throw Error("no stages requested");
    const auto& known = pipeline_stages();
    std::size_t last = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      auto it = std::find(known.begin(), known.end(), stages[i]);
      if (it == known.end()) throw Error("unknown stage '" + stages[i] + "'");
      const auto pos = static_cast<std::size_t>(it - known.begin());
      if (i > 0 && pos <= last) throw Error("stages must be listed once, in pipeline order");
      last = pos;
    }
  }

  json to_json() const {
    return {{"corpus", corpus},   {"test_corpus", test_corpus},
            {"embeddings", embeddings}, {"teacher", teacher},
            {"hidden_states", hidden_states}, {"labels", labels},
            {"k", k},             {"alpha", alpha},
            {"beta", beta},       {"fill", to_string(fill)},
            {"epochs", epochs},   {"synonyms", synonym_k},
            {"dropout", dropout}, {"seed", seed},
            {"stages", stages}};
  }
};

// TOML-style key/value text with a [pipeline] section. Strings may be quoted;
// '#' starts a comment. Relative paths are resolved against the file's
// directory.
inline PipelineConfig parse_pipeline_config(std::istream& in, const fs::path& base_dir = {}) {
  PipelineConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  bool in_section = false;
  auto fail = [&](const std::string& what) {
    return Error("config line " + std::to_string(line_no) + ": " + what);
  };
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[pipeline]") throw fail("unknown section " + line);
      in_section = true;
      continue;
    }
    if (!in_section) throw fail("key outside the [pipeline] section");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      // Array of strings, e.g. stages = ["teach", "extract"].
      std::string joined;
      for (char c : value.substr(1, value.size() - 2)) {
        if (c != '"') joined.push_back(c);
      }
      value = joined;
    }
    try {
      cfg.set(key, value);
    } catch (const Error& e) {
      throw fail(e.what());
    }
  }
  if (!base_dir.empty()) {
    for (std::string* p : {&cfg.corpus, &cfg.test_corpus, &cfg.embeddings, &cfg.out_dir}) {
      if (!p->empty() && fs::path(*p).is_relative()) *p = (base_dir / *p).lexically_normal().string();
    }
    if (cfg.teacher != "random" && fs::path(cfg.teacher).is_relative()) {
      cfg.teacher = (base_dir / cfg.teacher).lexically_normal().string();
    }
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  return parse_pipeline_config(in, fs::path(path).parent_path());
}

// Artifact file names inside out_dir.
struct PipelinePaths {
  fs::path dir;
  fs::path augmented() const { return dir / "augmented.tsv"; }
  fs::path teacher() const { return dir / "teacher.json"; }
  fs::path train_traces() const { return dir / "train_traces.jsonl"; }
  fs::path test_traces() const { return dir / "test_traces.jsonl"; }
  fs::path model() const { return dir / "model.json"; }
  fs::path report() const { return dir / "report.json"; }
  fs::path manifest() const { return dir / "manifest.json"; }
};

struct PipelineResult {
  json manifest;
  std::optional<EvalReport> report;
};

inline std::size_t infer_labels(std::span<const Sentence> corpus) {
  int top = -1;
  for (const auto& s : corpus) {
    if (s.label) top = std::max(top, *s.label);
  }
  return std::max<std::size_t>(2, static_cast<std::size_t>(top + 1));
}

inline json manifest_entry(const fs::path& p) {
  return {{"file", p.filename().string()},
          {"sha256", sha256_file(p.string())},
          {"bytes", fs::file_size(p)}};
}

// Runs the requested stages. On failure every file written by this run is
// removed and a StageError naming the stage is thrown.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  const PipelinePaths paths{cfg.out_dir};
  std::vector<fs::path> written;
  std::string stage = "setup";
  auto note = [&](const std::string& msg) {
    if (log) *log << "[" << stage << "] " << msg << '\n';
  };
  auto wrote = [&](const fs::path& p) {
    written.push_back(p);
    note("wrote " + p.string());
  };

  PipelineResult result;
  try {
    fs::create_directories(paths.dir);
    if (cfg.corpus.empty() && (cfg.runs("augment") || cfg.runs("teach"))) {
      throw Error("no corpus configured");
    }
    std::vector<Sentence> d0;
    if (!cfg.corpus.empty()) d0 = read_corpus(cfg.corpus);

    stage = "augment";
    fs::path train_corpus = cfg.corpus;
    if (cfg.runs("augment")) {
      if (cfg.epochs > 0) {
        if (cfg.embeddings.empty()) throw Error("augmentation enabled but no embeddings file");
        const Alphabet alphabet = Alphabet::build(d0);
        auto [table, report] = load_embeddings(cfg.embeddings, alphabet);
        for (const auto& w : report.warnings) note("warning: " + w);
        note(std::to_string(report.matched) + "/" + std::to_string(alphabet.size()) +
             " tokens have embeddings");
        const auto d = augment_dataset(d0, alphabet, table, cfg.augment_config(), cfg.threads);
        write_corpus(paths.augmented().string(), d);
        wrote(paths.augmented());
        train_corpus = paths.augmented();
      } else {
        note("epochs = 0, training set is the original corpus");
      }
    } else if (fs::exists(paths.augmented())) {
      train_corpus = paths.augmented();
    }

    stage = "teach";
    if (cfg.runs("teach")) {
      SyntheticTeacher teacher;
      if (cfg.teacher == "random") {
        Alphabet alphabet = Alphabet::build(d0);
        alphabet.ensure_unknown();
        const std::size_t labels = cfg.labels ? cfg.labels : infer_labels(d0);
        teacher = sample_teacher(alphabet, cfg.hidden_states, labels, derive_seed(cfg.seed, "teach"));
      } else {
        teacher = SyntheticTeacher::load(cfg.teacher);
      }
      teacher.save(paths.teacher().string());
      wrote(paths.teacher());
      const auto train = read_corpus(train_corpus.string());
      write_traces(paths.train_traces().string(), run_traces(teacher, train, cfg.threads));
      wrote(paths.train_traces());
      const auto test = cfg.test_corpus.empty() ? d0 : read_corpus(cfg.test_corpus);
      write_traces(paths.test_traces().string(), run_traces(teacher, test, cfg.threads));
      wrote(paths.test_traces());
    }

    stage = "extract";
    if (cfg.runs("extract")) {
      const auto traces = read_traces(paths.train_traces().string());
      const Wfa model =
          build_wfa(traces, cfg.k, cfg.build_config(), derive_seed(cfg.seed, "extract"), cfg.threads);
      save_model(paths.model().string(), model);
      wrote(paths.model());
    }

    stage = "eval";
    if (cfg.runs("eval")) {
      const Wfa model = load_model(paths.model().string());
      const auto traces = read_traces(paths.test_traces().string());
      const auto cases = eval_cases(traces);
      EvalReport report = consistency_rate(model, cases, cfg.threads);
      std::ofstream out(paths.report());
      out << report.to_json().dump(2) << '\n';
      out.close();
      wrote(paths.report());
      note("consistency rate " + std::to_string(report.consistency_rate));
      result.report = std::move(report);
    }

    stage = "manifest";
    json artifacts = json::object();
    for (const fs::path& p : {paths.augmented(), paths.teacher(), paths.train_traces(),
                              paths.test_traces(), paths.model(), paths.report()}) {
      if (fs::exists(p)) artifacts[p.stem().string()] = manifest_entry(p);
    }
    result.manifest = {{"tool", "wfax"},
                       {"version", std::string(kVersion)},
                       {"seed", cfg.seed},
                       {"sub_seeds",
                        {{"augment", derive_seed(cfg.seed, "augment")},
                         {"teach", derive_seed(cfg.seed, "teach")},
                         {"extract", derive_seed(cfg.seed, "extract")}}},
                       {"config", cfg.to_json()},
                       {"artifacts", std::move(artifacts)}};
    std::ofstream out(paths.manifest());
    out << result.manifest.dump(2) << '\n';
    out.close();
    wrote(paths.manifest());
  } catch (const std::exception& e) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw StageError(stage, e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Filling-strategy sweep: {null, uniform, empirical} x {context off, on}, all
// sharing one clustering and one set of count matrices.

struct CompareCell {
  FillStrategy fill = FillStrategy::kEmpirical;
  bool context = false;
  double alpha = 0.0;
  double consistency_rate = 0.0;
  double seconds = 0.0;
  std::string counts_digest;
};

struct CompareResult {
  std::vector<CompareCell> cells;
  double majority_baseline = 0.0;

  const CompareCell& cell(FillStrategy fill, bool context) const {
    for (const auto& c : cells) {
      if (c.fill == fill && c.context == context) return c;
    }
    throw Error("no such comparison cell");
  }

  json to_json() const {
    json rows = json::array();
    for (const auto& c : cells) {
      rows.push_back({{"fill", to_string(c.fill)},
                      {"context", c.context},
                      {"alpha", c.alpha},
                      {"consistency_rate", c.consistency_rate},
                      {"counts_digest", c.counts_digest}});
    }
    return {{"cells", rows}, {"majority_baseline", majority_baseline}};
  }
};

inline double majority_baseline(std::span<const EvalCase> cases) {
  if (cases.empty()) throw Error("empty test set");
  std::map<std::size_t, std::size_t> freq;
  for (const auto& c : cases) ++freq[c.teacher_label];
  std::size_t best = 0;
  for (const auto& [label, n] : freq) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(cases.size());
}

inline CompareResult compare_strategies(std::span<const Trace> train, std::span<const Trace> test,
                                        std::size_t k, double alpha, double beta,
                                        std::uint64_t seed, std::size_t threads = 1) {
  if (train.empty()) throw Error("no training traces");
  const AbstractStateSet states = fit_states(stack_outputs(train), k, seed, {}, threads);
  const CountMatrices counts = count_transitions(states, train, threads);
  const auto cases = eval_cases(test);
  CompareResult r;
  r.majority_baseline = majority_baseline(cases);
  for (bool context : {false, true}) {
    for (FillStrategy fill : {FillStrategy::kNull, FillStrategy::kUniform, FillStrategy::kEmpirical}) {
      CompareCell c;
      c.fill = fill;
      c.context = context;
      c.alpha = context ? alpha : 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      const Wfa model = assemble_wfa(states, counts, {beta, c.alpha, fill}, threads);
      c.consistency_rate = consistency_rate(model, cases, threads).consistency_rate;
      c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      c.counts_digest = model.stats.counts_digest;
      r.cells.push_back(std::move(c));
    }
  }
  return r;
}

// Table in the layout: rows = context configuration, columns = fill strategy.
inline void print_compare_table(std::ostream& out, const CompareResult& r) {
  out << std::left << std::setw(14) << "configuration";
  for (const char* f : {"null", "uniform", "empirical"}) {
    out << std::right << std::setw(14) << (std::string(f) + " CR") << std::setw(9) << "time(s)";
  }
  out << '\n';
  for (bool context : {false, true}) {
    out << std::left << std::setw(14) << (context ? "context" : "none");
    for (FillStrategy f : {FillStrategy::kNull, FillStrategy::kUniform, FillStrategy::kEmpirical}) {
      const auto& c = r.cell(f, context);
      out << std::right << std::fixed << std::setprecision(4) << std::setw(14)
          << c.consistency_rate << std::setprecision(3) << std::setw(9) << c.seconds;
    }
    out << '\n';
  }
  out << "majority-class baseline: " << std::setprecision(4) << r.majority_baseline << '\n';
}

}  // namespace wfax
