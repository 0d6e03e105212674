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

#include "wfax/builder.hpp"

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "oracle/straight_line.hpp"
#include "wfax/runtime.hpp"
#include "wfax/synthetic.hpp"

namespace wfax {
namespace {

Matrix M(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) out(i, j++) = v;
    ++i;
  }
  return out;
}

CountMatrix C(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  CountMatrix out(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (auto v : r) out(i, j++) = v;
    ++i;
  }
  return out;
}

double max_gap(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

bool row_stochastic(const Matrix& m, double tol = 1e-12) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if ((m.row(i).array() < -tol).any() || std::abs(m.row(i).sum() - 1.0) > tol) return false;
  }
  return true;
}

TEST(CountMatricesTest, RepeatedTransitionsAccumulate) {
  const std::vector<Transition> ts{{0, "a", 1}, {0, "a", 1}, {1, "a", 2}};
  const auto counts = count_transitions(ts, 3);
  EXPECT_EQ(counts.at("a"), C({{0, 2, 0}, {0, 0, 1}, {0, 0, 0}}));
  EXPECT_EQ(counts.token_total("a"), 3);
  EXPECT_EQ(counts.at("zzz"), CountMatrix::Zero(3, 3));
  EXPECT_EQ(counts.total(), 3);
}

TEST(CountMatricesTest, RejectsInvalidTransitions) {
  CountMatrices counts(3);
  EXPECT_THROW(counts.add(0, "a", 3), Error);
  EXPECT_THROW(counts.add(3, "a", 1), Error);
  EXPECT_THROW(counts.add(1, "a", 0), Error);
}

TEST(CountMatricesTest, DigestIgnoresInsertionOrder) {
  CountMatrices a(3);
  a.add(0, "x", 1);
  a.add(1, "y", 2);
  CountMatrices b(3);
  b.add(1, "y", 2);
  b.add(0, "x", 1);
  EXPECT_EQ(a.digest(), b.digest());
  b.add(0, "x", 2);
  EXPECT_NE(a.digest(), b.digest());
}

TEST(TransitionRuleTest, WorkedExampleWithMissingRow) {
  // e^{-M[2,0]} = 2 e^{-M[2,1]}, so the reference row for state 2 is
  // (2*[1,3,0] + [1,1,0]) / 10 = [0.3, 0.7, 0].
  const double ln2 = std::log(2.0);
  const Matrix dist = M({{0, 1, 0.5}, {1, 0, 0.5 + ln2}, {0.5, 0.5 + ln2, 0}});
  const CountMatrix t = C({{1, 3, 0}, {1, 1, 0}, {0, 0, 0}});
  const BuildConfig cfg{0.5, 0.2, FillStrategy::kEmpirical};
  const Matrix e = build_transition_matrix(t, dist, cfg);
  EXPECT_LT(max_gap(e, M({{0.25, 0.75, 0}, {0.5, 0.5, 0}, {0.15, 0.35, 0.5}})), 1e-9);
  const Matrix blended = enhance_context(e, 0.2);
  EXPECT_LT(max_gap(blended, M({{0.4, 0.6, 0}, {0.4, 0.6, 0}, {0.12, 0.28, 0.6}})), 1e-9);
}

TEST(TransitionRuleTest, FillStrategiesOnAMissingRow) {
  const Matrix dist = M({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  const CountMatrix t = C({{0, 2, 2}, {0, 0, 0}, {0, 0, 0}});
  EXPECT_LT(max_gap(build_transition_matrix(t, dist, {0.3, 0.0, FillStrategy::kUniform}),
                    M({{0, 0.5, 0.5}, {1. / 3, 1. / 3, 1. / 3}, {1. / 3, 1. / 3, 1. / 3}})),
            1e-15);
  EXPECT_LT(max_gap(build_transition_matrix(t, dist, {0.3, 0.0, FillStrategy::kNull}),
                    M({{0, 0.5, 0.5}, {0, 0, 0}, {0, 0, 0}})),
            1e-15);
  // Only row 0 is observed, so every reference row is row 0.
  const Matrix e = build_transition_matrix(t, dist, {0.3, 0.0, FillStrategy::kEmpirical});
  EXPECT_LT(max_gap(e, M({{0, 0.5, 0.5}, {0, 0.85, 0.15}, {0, 0.15, 0.85}})), 1e-12);
}

TEST(TransitionRuleTest, ZeroReferenceRateKeepsMissingStatesInPlace) {
  const Matrix dist = M({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  const CountMatrix t = C({{0, 1, 4}, {0, 0, 0}, {0, 0, 0}});
  const Matrix e = build_transition_matrix(t, dist, {0.0, 0.0, FillStrategy::kEmpirical});
  EXPECT_EQ(e.row(1), M({{0, 1, 0}}).row(0));
  EXPECT_EQ(e.row(2), M({{0, 0, 1}}).row(0));
}

TEST(TransitionRuleTest, UnseenTokenIsIdentityUnderEmpiricalFill) {
  const Matrix dist = M({{0, 1}, {1, 0}});
  const Matrix e = build_transition_matrix(CountMatrix::Zero(2, 2), dist, {});
  EXPECT_EQ(e, Matrix::Identity(2, 2));
}

TEST(TransitionRuleTest, InvariantToAConstantDistanceShift) {
  const Matrix dist = M({{0, 0.4, 1.3, 0.9}, {0.4, 0, 1.0, 0.6}, {1.3, 1.0, 0, 0.7},
                         {0.9, 0.6, 0.7, 0}});
  const CountMatrix t = C({{0, 3, 1, 0}, {0, 0, 0, 0}, {0, 2, 0, 5}, {0, 0, 0, 0}});
  const Matrix shifted = dist.array() + 2.5;
  const BuildConfig cfg{0.4, 0.0, FillStrategy::kEmpirical};
  EXPECT_LT(max_gap(build_transition_matrix(t, dist, cfg), build_transition_matrix(t, shifted, cfg)),
            1e-12);
}

TEST(EnhanceContextTest, BoundaryValuesOfAlpha) {
  const Matrix e = M({{0.1, 0.9}, {0.6, 0.4}});
  EXPECT_EQ(enhance_context(e, 0.0), e);
  EXPECT_EQ(enhance_context(e, 1.0), Matrix::Identity(2, 2));
  EXPECT_THROW(enhance_context(e, 1.5), Error);
  EXPECT_THROW(enhance_context(e, -0.1), Error);
}

TEST(FillStrategyTest, ParsesAndPrints) {
  for (auto f : {FillStrategy::kEmpirical, FillStrategy::kUniform, FillStrategy::kNull}) {
    EXPECT_EQ(parse_fill_strategy(to_string(f)), f);
  }
  EXPECT_THROW(parse_fill_strategy("zero"), Error);
}

AbstractStateSet two_state_set() {
  const Matrix centroids = M({{1, 0}, {0, 1}});
  const Matrix centers = M({{0.5, 0.5}, {1, 0}, {0, 1}});
  return AbstractStateSet::from_parts(centroids, centers, {2, 1});
}

TEST(AssembleWfaTest, SingleTraceModel) {
  // "a b a" visits states 1, 2, 1.
  const auto states = two_state_set();
  Trace trace{{{"a", "b", "a"}, std::nullopt},
              {RowVector{{0.9, 0.1}}, RowVector{{0.2, 0.8}}, RowVector{{0.7, 0.3}}}};
  const auto counts = count_transitions(states, std::vector<Trace>{trace});
  EXPECT_EQ(counts.at("a"), C({{0, 1, 0}, {0, 0, 0}, {0, 1, 0}}));
  EXPECT_EQ(counts.at("b"), C({{0, 0, 0}, {0, 0, 1}, {0, 0, 0}}));

  const auto w = assemble_wfa(states, counts, {0.3, 0.0, FillStrategy::kNull});
  EXPECT_EQ(w.tokens, (std::vector<std::string>{"a", "b", "<unk>"}));
  EXPECT_EQ(w.stats.token_counts, (std::vector<std::int64_t>{2, 1, 0}));
  EXPECT_EQ(w.stats.missing_rows, (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_EQ(w.matrix("a"), M({{0, 1, 0}, {0, 0, 0}, {0, 1, 0}}));
  EXPECT_EQ(w.matrix("never-seen"), Matrix::Zero(3, 3));
  EXPECT_EQ(w.initial, RowVector({{1, 0, 0}}));
  EXPECT_EQ(w.final_weights, states.centers);
}

TEST(AssembleWfaTest, StochasticUnlessNullFilled) {
  const auto vocab = synthetic::vocabulary(20);
  const auto teacher = sample_teacher(synthetic::ranked_alphabet(vocab), 4, 3, 8);
  const auto traces = run_traces(teacher, synthetic::zipf_sentences(vocab, 80, 3, 8, 1));
  for (double alpha : {0.0, 0.2, 1.0}) {
    for (auto fill : {FillStrategy::kEmpirical, FillStrategy::kUniform}) {
      const auto w = build_wfa(traces, 5, {0.3, alpha, fill}, 2);
      for (std::size_t i = 0; i < w.tokens.size(); ++i) {
        EXPECT_TRUE(row_stochastic(w.matrices[i])) << w.tokens[i];
        EXPECT_TRUE(row_stochastic(w.base[i])) << w.tokens[i];
      }
    }
  }
  const auto w = build_wfa(traces, 5, {0.3, 0.0, FillStrategy::kNull}, 2);
  for (std::size_t i = 0; i < w.tokens.size(); ++i) {
    const auto& m = w.matrices[i];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double s = m.row(r).sum();
      EXPECT_TRUE(s == 0.0 || std::abs(s - 1.0) < 1e-12);
    }
  }
}

class ExtractedModelTest : public ::testing::Test {
 protected:
  void SetUp() override {
    vocab_ = synthetic::vocabulary(30);
    teacher_ = sample_teacher(synthetic::ranked_alphabet(vocab_), 5, 3, 13);
    sentences_ = synthetic::zipf_sentences(vocab_, 150, 3, 10, 5);
    traces_ = run_traces(teacher_, sentences_);
  }

  std::vector<std::string> vocab_;
  SyntheticTeacher teacher_ = sample_teacher(synthetic::ranked_alphabet({"x", "y"}), 1, 2, 0);
  std::vector<Sentence> sentences_;
  std::vector<Trace> traces_;
};

TEST_F(ExtractedModelTest, PrefixCountsNeverExceedFullCounts) {
  const auto states = fit_states(stack_outputs(traces_), 6, 3);
  const auto full = count_transitions(states, traces_);
  std::vector<Trace> prefixes;
  for (const auto& t : traces_) {
    const std::size_t n = t.sentence.words.size() / 2 + 1;
    prefixes.push_back({{{t.sentence.words.begin(), t.sentence.words.begin() + n}, std::nullopt},
                        {t.outputs.begin(), t.outputs.begin() + n}});
  }
  const auto part = count_transitions(states, prefixes);
  for (const auto& token : part.tokens()) {
    EXPECT_TRUE((part.at(token).array() <= full.at(token).array()).all()) << token;
  }
  EXPECT_LT(part.total(), full.total());
}

TEST_F(ExtractedModelTest, MatchesStraightLineReference) {
  for (auto fill : {FillStrategy::kEmpirical, FillStrategy::kUniform, FillStrategy::kNull}) {
    const BuildConfig cfg{0.3, 0.2, fill};
    const auto w = build_wfa(traces_, 6, cfg, 3);
    const std::size_t n = w.num_states();

    std::vector<std::vector<std::string>> words;
    std::vector<std::vector<int>> seq;
    for (const auto& t : traces_) {
      words.push_back(t.sentence.words);
      std::vector<int> s;
      for (const auto& o : t.outputs) s.push_back(static_cast<int>(w.states.assign(o)));
      seq.push_back(s);
    }
    oracle::Mat centers(n, oracle::Vec(w.states.m));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < w.states.m; ++c) centers[i][c] = w.states.centers(i, c);
    }
    const auto dist = oracle::distances(centers);
    auto counts = oracle::count(words, seq, static_cast<int>(n));
    counts["<unk>"] = oracle::IntMat(n, std::vector<long long>(n, 0));
    std::map<std::string, oracle::Mat> mats;
    const int fill_code = fill == FillStrategy::kEmpirical ? 0 : fill == FillStrategy::kUniform ? 1 : 2;
    for (const auto& [token, t] : counts) {
      mats[token] = oracle::blend(oracle::transition(t, dist, cfg.beta, fill_code), cfg.alpha);
      const Matrix& got = w.matrix(token);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(got(i, j), mats[token][i][j], 1e-12);
      }
    }
    for (std::size_t s = 0; s < 20; ++s) {
      const RowVector got = weight(w, sentences_[s]);
      const auto want = oracle::weight(mats, "<unk>", sentences_[s].words, centers);
      for (std::size_t c = 0; c < want.size(); ++c) EXPECT_NEAR(got[c], want[c], 1e-12);
    }
  }
}

TEST_F(ExtractedModelTest, JsonRoundTrip) {
  const auto w = build_wfa(traces_, 6, {0.3, 0.2, FillStrategy::kEmpirical}, 3);
  const std::string text = model_to_json(w).dump();
  const auto back = model_from_json(json::parse(text));
  ASSERT_EQ(back.tokens, w.tokens);
  EXPECT_EQ(back.stats.token_counts, w.stats.token_counts);
  EXPECT_EQ(back.stats.missing_rows, w.stats.missing_rows);
  EXPECT_EQ(back.stats.counts_digest, w.stats.counts_digest);
  EXPECT_EQ(back.states.sizes, w.states.sizes);
  EXPECT_LT(max_gap(back.final_weights, w.final_weights), 1e-12);
  for (std::size_t i = 0; i < w.tokens.size(); ++i) {
    EXPECT_LT(max_gap(back.matrices[i], w.matrices[i]), 1e-12);
    EXPECT_LT(max_gap(back.base[i], w.base[i]), 1e-12);
  }
  for (const auto& s : sentences_) {
    EXPECT_LT((weight(back, s) - weight(w, s)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(model_to_json(back).dump(), text);
}

TEST_F(ExtractedModelTest, ByteIdenticalAcrossRunsAndThreads) {
  const BuildConfig cfg{0.3, 0.2, FillStrategy::kEmpirical};
  const std::string a = model_to_json(build_wfa(traces_, 6, cfg, 3, 1)).dump();
  const std::string b = model_to_json(build_wfa(traces_, 6, cfg, 3, 1)).dump();
  const std::string c = model_to_json(build_wfa(traces_, 6, cfg, 3, 3)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(ModelJsonTest, RejectsForeignDocuments) {
  EXPECT_THROW(model_from_json(json{{"format", "other"}}), Error);
  EXPECT_THROW(model_from_json(json{{"format", "wfax-model"}, {"version", 99}}), Error);
  EXPECT_THROW(model_from_json(json{{"format", "wfax-model"}, {"version", 1}}), Error);
}

}  // namespace
}  // namespace wfax
