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

// wfax: extract weighted automata from recorded classifier traces.
//
//   wfax augment  --corpus c.tsv --embeddings e.txt --epochs 2 --out d.tsv
//   wfax teach    --teacher random --corpus d.tsv --out traces.jsonl
//   wfax extract  --traces traces.jsonl --clusters 10 --out model.json
//   wfax eval     --model model.json --traces test.jsonl --report report.json
//   wfax inspect  --model model.json
//   wfax compare  --traces traces.jsonl --test-traces test.jsonl
//   wfax pipeline --config pipeline.toml
//
// --seed, --threads and --config are accepted by every subcommand. Values in
// the config file act as defaults; explicit flags win.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wfax/wfax.hpp"

namespace {

using wfax::PipelineConfig;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> k;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::string> fill;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> synonyms;
  std::optional<double> dropout;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> labels;
  std::optional<std::string> teacher;
  std::optional<std::string> corpus;
  std::optional<std::string> embeddings;
  std::optional<std::string> out_dir;

  void apply(PipelineConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (k) cfg.k = *k;
    if (alpha) cfg.alpha = *alpha;
    if (beta) cfg.beta = *beta;
    if (fill) cfg.fill = wfax::parse_fill_strategy(*fill);
    if (epochs) cfg.epochs = *epochs;
    if (synonyms) cfg.synonym_k = *synonyms;
    if (dropout) cfg.dropout = *dropout;
    if (hidden) cfg.hidden_states = *hidden;
    if (labels) cfg.labels = *labels;
    if (teacher) cfg.teacher = *teacher;
    if (corpus) cfg.corpus = *corpus;
    if (embeddings) cfg.embeddings = *embeddings;
    if (out_dir) cfg.out_dir = *out_dir;
  }
};

void write_json(const std::string& path, const wfax::json& j) {
  std::ofstream out(path);
  if (!out) throw wfax::Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

void print_inspect(const wfax::Wfa& model) {
  const auto r = wfax::inspect_model(model);
  std::cout << "states: " << model.num_states() << " (k=" << model.states.k
            << " clusters + initial), labels: " << model.labels()
            << ", tokens: " << model.tokens.size() << '\n'
            << "alpha=" << model.config.alpha << " beta=" << model.config.beta
            << " fill=" << wfax::to_string(model.config.fill) << "\n\n";
  std::cout << "state  size      entropy  center\n";
  for (std::size_t i = 0; i < model.num_states(); ++i) {
    std::cout << std::setw(5) << i << "  " << std::setw(8)
              << (i == 0 ? std::string("-") : std::to_string(r.cluster_sizes[i - 1])) << "  "
              << std::fixed << std::setprecision(4) << std::setw(7) << r.center_entropy[i]
              << "  [";
    for (Eigen::Index c = 0; c < model.final_weights.cols(); ++c) {
      std::cout << (c ? " " : "") << model.final_weights(static_cast<Eigen::Index>(i), c);
    }
    std::cout << "]\n";
  }
  std::cout << "\nmissing rows by token frequency decile (1 = most frequent)\n"
            << "decile  tokens  count range      missing fraction\n";
  for (const auto& d : r.deciles) {
    std::cout << std::setw(6) << d.decile << "  " << std::setw(6) << d.tokens << "  "
              << std::setw(7) << d.min_count << "-" << std::left << std::setw(8) << d.max_count
              << std::right << "  " << std::setprecision(4) << d.mean_missing_fraction << '\n';
  }
  std::cout << "\ntransitions: " << r.total_transitions
            << ", median per token: " << std::setprecision(2) << r.median_transitions
            << ", Zipf estimate 2N/(m ln m): " << r.zipf_estimate << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted automaton extraction from sequence-classifier traces"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  app.add_option("--seed", ov.seed, "Master random seed");
  app.add_option("--threads", ov.threads, "Worker thread cap (0 = all cores)");
  app.add_option("--config", config_path, "Pipeline config file ([pipeline] section)");

  // augment
  std::string aug_out;
  auto* augment = app.add_subcommand("augment", "Synonym replacement + dropout augmentation");
  augment->add_option("--corpus", ov.corpus, "Input corpus (label<TAB>tokens)");
  augment->add_option("--embeddings", ov.embeddings, "Embedding file (token v1 .. vd)");
  augment->add_option("--epochs", ov.epochs, "Generated copies per sentence");
  augment->add_option("--synonyms", ov.synonyms, "Synonym list size k");
  augment->add_option("--dropout", ov.dropout, "Dropout probability");
  augment->add_option("--out", aug_out, "Output corpus")->required();

  // teach
  std::string teach_out, save_teacher;
  auto* teach = app.add_subcommand("teach", "Record teacher traces for a corpus");
  teach->add_option("--teacher", ov.teacher, "Teacher JSON file or 'random'");
  teach->add_option("--corpus", ov.corpus, "Input corpus");
  teach->add_option("--hidden", ov.hidden, "Hidden states of a random teacher");
  teach->add_option("--labels", ov.labels, "Labels of a random teacher");
  teach->add_option("--save-teacher", save_teacher, "Write the teacher definition used");
  teach->add_option("--out", teach_out, "Output trace file (JSONL)")->required();

  // extract
  std::string traces_path, model_out;
  auto* extract = app.add_subcommand("extract", "Build a WFA from traces");
  extract->add_option("--traces", traces_path, "Training traces (JSONL)")->required();
  extract->add_option("--clusters", ov.k, "Number of clusters k");
  extract->add_option("--alpha", ov.alpha, "Static probability");
  extract->add_option("--beta", ov.beta, "Reference rate");
  extract->add_option("--fill", ov.fill, "Missing-row fill: empirical|uniform|null");
  extract->add_option("--out", model_out, "Output model (JSON)")->required();

  // eval
  std::string model_path, eval_traces, report_out;
  auto* eval = app.add_subcommand("eval", "Consistency rate of a model against traces");
  eval->add_option("--model", model_path, "Model file")->required();
  eval->add_option("--traces", eval_traces, "Test traces (JSONL)")->required();
  eval->add_option("--report", report_out, "Report output (JSON)");

  // inspect
  std::string inspect_model;
  auto* inspect = app.add_subcommand("inspect", "Print cluster and sparsity statistics");
  inspect->add_option("--model", inspect_model, "Model file")->required();

  // compare
  std::string cmp_train, cmp_test, cmp_out;
  auto* compare = app.add_subcommand("compare", "Sweep fill strategies x context enhancement");
  compare->add_option("--traces", cmp_train, "Training traces")->required();
  compare->add_option("--test-traces", cmp_test, "Test traces")->required();
  compare->add_option("--clusters", ov.k, "Number of clusters k");
  compare->add_option("--alpha", ov.alpha, "Static probability for the context rows");
  compare->add_option("--beta", ov.beta, "Reference rate");
  compare->add_option("--out", cmp_out, "Write the table as JSON");

  // pipeline
  std::vector<std::string> sets;
  auto* pipeline = app.add_subcommand("pipeline", "Run augment -> teach -> extract -> eval");
  pipeline->add_option("--corpus", ov.corpus, "Training corpus");
  pipeline->add_option("--embeddings", ov.embeddings, "Embedding file");
  pipeline->add_option("--out-dir", ov.out_dir, "Artifact directory");
  pipeline->add_option("--set", sets, "Override a config key: key=value");

  for (auto* sub : {augment, teach, extract, eval, inspect, compare, pipeline}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = wfax::load_pipeline_config(config_path);
    ov.apply(cfg);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw wfax::Error("--set expects key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }

    if (*augment) {
      if (cfg.corpus.empty() || cfg.embeddings.empty()) {
        throw wfax::Error("augment needs --corpus and --embeddings");
      }
      const auto d0 = wfax::read_corpus(cfg.corpus);
      const auto alphabet = wfax::Alphabet::build(d0);
      auto [table, report] = wfax::load_embeddings(cfg.embeddings, alphabet);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      std::cerr << report.matched << "/" << alphabet.size() << " tokens have embeddings; "
                << report.missing.size() << " skipped\n";
      const auto d = wfax::augment_dataset(d0, alphabet, table, cfg.augment_config(), cfg.threads);
      wfax::write_corpus(aug_out, d);
      std::cerr << "wrote " << d.size() << " sentences to " << aug_out << '\n';
    } else if (*teach) {
      if (cfg.corpus.empty()) throw wfax::Error("teach needs --corpus");
      const auto corpus = wfax::read_corpus(cfg.corpus);
      wfax::SyntheticTeacher teacher;
      if (cfg.teacher == "random") {
        auto alphabet = wfax::Alphabet::build(corpus);
        alphabet.ensure_unknown();
        teacher = wfax::sample_teacher(alphabet, cfg.hidden_states,
                                       cfg.labels ? cfg.labels : wfax::infer_labels(corpus),
                                       wfax::derive_seed(cfg.seed, "teach"));
      } else {
        teacher = wfax::SyntheticTeacher::load(cfg.teacher);
      }
      if (!save_teacher.empty()) teacher.save(save_teacher);
      const auto traces = wfax::run_traces(teacher, corpus, cfg.threads);
      wfax::write_traces(teach_out, traces);
      std::cerr << "wrote " << traces.size() << " traces to " << teach_out << '\n';
    } else if (*extract) {
      const auto traces = wfax::read_traces(traces_path);
      const auto model = wfax::build_wfa(traces, cfg.k, cfg.build_config(),
                                         wfax::derive_seed(cfg.seed, "extract"), cfg.threads);
      wfax::save_model(model_out, model);
      std::cerr << "extracted " << model.num_states() << " states x " << model.tokens.size()
                << " tokens from " << traces.size() << " traces -> " << model_out << '\n';
    } else if (*eval) {
      const auto model = wfax::load_model(model_path);
      const auto traces = wfax::read_traces(eval_traces);
      const auto cases = wfax::eval_cases(traces);
      const auto report = wfax::consistency_rate(model, cases, cfg.threads);
      if (!report_out.empty()) write_json(report_out, report.to_json());
      std::cout << "consistency rate: " << report.consistency_rate << " (" << report.n_agree
                << "/" << report.n_total << "), oov rate: " << report.oov_rate;
      if (report.n_degenerate) std::cout << ", degenerate weights: " << report.n_degenerate;
      std::cout << '\n';
    } else if (*inspect) {
      print_inspect(wfax::load_model(inspect_model));
    } else if (*compare) {
      const auto train = wfax::read_traces(cmp_train);
      const auto test = wfax::read_traces(cmp_test);
      const auto result = wfax::compare_strategies(train, test, cfg.k, cfg.alpha, cfg.beta,
                                                   wfax::derive_seed(cfg.seed, "extract"),
                                                   cfg.threads);
      wfax::print_compare_table(std::cout, result);
      if (!cmp_out.empty()) write_json(cmp_out, result.to_json());
    } else if (*pipeline) {
      const auto result = wfax::run_pipeline(cfg, &std::cerr);
      if (result.report) {
        std::cout << "consistency rate: " << result.report->consistency_rate << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "wfax: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
