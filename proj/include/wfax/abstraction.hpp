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

// State abstraction: k-means over probabilistic outputs.
//
// State 0 is the initial state. It is never the image of assign(); its center
// is the uniform distribution over labels. States 1..k are the clusters.

#pragma once

#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "wfax/common.hpp"
#include "wfax/teacher.hpp"

namespace wfax {

struct KMeansOptions {
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // max centroid movement
};

// Euclidean distances between rows of `centers`.
inline Matrix distance_matrix(const Matrix& centers) {
  const auto n = centers.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (centers.row(i) - centers.row(j)).norm();
    }
  }
  return d;
}

namespace detail {

inline std::size_t nearest_row(const Matrix& centroids, const Eigen::Ref<const RowVector>& x,
                               double* best_distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
    const double d = (centroids.row(j) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(j);
    }
  }
  if (best_distance) *best_distance = best_d;
  return best;
}

}  // namespace detail

struct AbstractStateSet {
  std::size_t k = 0;      // number of clusters
  std::size_t m = 0;      // number of labels
  Matrix centroids;       // k x m, used by assign()
  Matrix centers;         // (k+1) x m, row 0 = initial state
  Matrix distance;        // (k+1) x (k+1)
  std::vector<std::int64_t> sizes;  // members per cluster, length k

  std::size_t num_states() const { return k + 1; }

  // Abstraction function: nearest centroid, ties to the lowest index. Returns a
  // state index in 1..k.
  std::size_t assign(const Eigen::Ref<const RowVector>& output) const {
    if (output.size() != static_cast<Eigen::Index>(m)) {
      throw Error("output has " + std::to_string(output.size()) + " labels, states expect " +
                  std::to_string(m));
    }
    return detail::nearest_row(centroids, output) + 1;
  }

  // Rebuilds a state set from stored centroids/centers (model loading).
  static AbstractStateSet from_parts(Matrix centroids, Matrix centers,
                                     std::vector<std::int64_t> sizes) {
    AbstractStateSet s;
    s.k = static_cast<std::size_t>(centroids.rows());
    s.m = static_cast<std::size_t>(centroids.cols());
    if (centers.rows() != centroids.rows() + 1 || centers.cols() != centroids.cols()) {
      throw Error("centers must be (k+1) x m");
    }
    if (sizes.empty()) sizes.assign(s.k, 0);
    if (sizes.size() != s.k) throw Error("cluster sizes must have length k");
    s.centroids = std::move(centroids);
    s.centers = std::move(centers);
    s.sizes = std::move(sizes);
    s.distance = distance_matrix(s.centers);
    return s;
  }
};

// Stacks every output of every trace into an n x m matrix.
inline Matrix stack_outputs(std::span<const Trace> traces) {
  std::size_t n = 0;
  Eigen::Index m = 0;
  for (const auto& t : traces) {
    n += t.outputs.size();
    if (!t.outputs.empty()) {
      if (m == 0) m = t.outputs.front().size();
      for (const auto& o : t.outputs) {
        if (o.size() != m) throw Error("traces disagree on the number of labels");
      }
    }
  }
  Matrix points(static_cast<Eigen::Index>(n), m);
  Eigen::Index row = 0;
  for (const auto& t : traces) {
    for (const auto& o : t.outputs) points.row(row++) = o;
  }
  return points;
}

// k-means++ seeding followed by Lloyd iterations. Assignment runs in parallel;
// centroid sums are reduced in point order so the result is thread-count
// independent.
inline AbstractStateSet fit_states(const Matrix& points, std::size_t k, std::uint64_t seed,
                                   const KMeansOptions& opts = {}, std::size_t threads = 1) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto m = points.cols();
  if (k == 0) throw Error("k must be positive");
  if (n < k) throw Error("k too large: " + std::to_string(n) + " outputs for k=" +
                         std::to_string(k));
  {
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < n && distinct.size() < k; ++i) {
      const RowVector r = points.row(static_cast<Eigen::Index>(i));
      distinct.emplace(r.data(), r.data() + r.size());
    }
    if (distinct.size() < k) {
      throw Error("k too large: only " + std::to_string(distinct.size()) +
                  " distinct outputs for k=" + std::to_string(k));
    }
  }

  std::mt19937_64 engine(splitmix64(seed));
  Matrix centroids(static_cast<Eigen::Index>(k), m);

  // k-means++: each further seed is drawn with probability proportional to its
  // squared distance from the nearest chosen seed.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = uniform_index(engine, n);
  for (std::size_t c = 0; c < k; ++c) {
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points.row(static_cast<Eigen::Index>(i)) -
                        centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    if (c + 1 == k) break;
    double target = uniform01(engine) * total;
    chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      chosen = i;
      if (target < 0.0) break;
    }
    // Only possible if every point coincides with a seed; the distinct check
    // above rules that out, but fall back to the farthest point regardless.
    if (chosen == n) {
      chosen = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
  }

  std::vector<std::size_t> labels(n, k);
  std::vector<double> dist(n, 0.0);
  auto assign_all = [&] {
    bool changed = false;
    std::vector<char> flags(n, 0);
    parallel_for(n, threads, [&](std::size_t i) {
      const std::size_t l =
          detail::nearest_row(centroids, points.row(static_cast<Eigen::Index>(i)), &dist[i]);
      if (l != labels[i]) {
        labels[i] = l;
        flags[i] = 1;
      }
    });
    for (char f : flags) changed = changed || f;
    return changed;
  };

  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    const bool changed = assign_all();
    if (!changed && iter > 0) break;

    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), m);
    std::vector<std::int64_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
      ++counts[labels[i]];
    }
    Matrix next = centroids;
    std::vector<char> taken(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        next.row(static_cast<Eigen::Index>(j)) =
            sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
        continue;
      }
      // Empty cluster: re-seed at the point farthest from its centroid.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      taken[far] = 1;
      next.row(static_cast<Eigen::Index>(j)) = points.row(static_cast<Eigen::Index>(far));
    }
    double movement = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      movement = std::max(movement, (next.row(static_cast<Eigen::Index>(j)) -
                                     centroids.row(static_cast<Eigen::Index>(j))).norm());
    }
    centroids = std::move(next);
    if (movement < opts.tolerance) break;
  }

  // Final λ and centers as member means under that λ.
  assign_all();
  Matrix centers(static_cast<Eigen::Index>(k + 1), m);
  centers.row(0).setConstant(1.0 / static_cast<double>(m));
  std::vector<std::int64_t> sizes(k, 0);
  Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), m);
  for (std::size_t i = 0; i < n; ++i) {
    sums.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
    ++sizes[labels[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    centers.row(row + 1) = sizes[j] > 0 ? RowVector(sums.row(row) / static_cast<double>(sizes[j]))
                                        : RowVector(centroids.row(row));
  }
  return AbstractStateSet::from_parts(std::move(centroids), std::move(centers), std::move(sizes));
}

inline AbstractStateSet fit_states(std::span<const ProbOutput> outputs, std::size_t k,
                                   std::uint64_t seed, const KMeansOptions& opts = {},
                                   std::size_t threads = 1) {
  if (outputs.empty()) throw Error("k too large: no outputs to cluster");
  Matrix points(static_cast<Eigen::Index>(outputs.size()), outputs.front().size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].size() != points.cols()) throw Error("outputs disagree on label count");
    points.row(static_cast<Eigen::Index>(i)) = outputs[i];
  }
  return fit_states(points, k, seed, opts, threads);
}

// An abstract transition (from, token, to) observed in a trace.
struct Transition {
  std::size_t from = 0;
  std::string token;
  std::size_t to = 0;

  bool operator==(const Transition&) const = default;
};

// The first transition leaves the initial state 0; transition i leaves the
// state of output i-1.
inline std::vector<Transition> trace_to_transitions(const AbstractStateSet& states,
                                                    const Trace& trace) {
  if (trace.outputs.size() != trace.sentence.words.size()) {
    throw Error("trace has mismatched outputs and tokens");
  }
  std::vector<Transition> out;
  out.reserve(trace.outputs.size());
  std::size_t from = 0;
  for (std::size_t i = 0; i < trace.outputs.size(); ++i) {
    const std::size_t to = states.assign(trace.outputs[i]);
    out.push_back({from, trace.sentence.words[i], to});
    from = to;
  }
  return out;
}

}  // namespace wfax
