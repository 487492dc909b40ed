// Copyright 2026 The advdetect Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Bagged depth-limited Gini trees with per-split feature subsampling.

#include <cmath>
#include <numeric>
#include <random>

#include "internal.hpp"

namespace advdetect {

Verdict DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::int32_t at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(at)];
    at = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].leaf;
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  std::span<const int> y;
  std::span<const double> w;
  int max_depth;
  int max_features;
  std::mt19937_64 rng;
  DecisionTree tree;

  static double gini_mass(double w0, double w1) {
    const double total = w0 + w1;
    if (total <= 0.0) return 0.0;
    return total - (w0 * w0 + w1 * w1) / total;
  }

  std::vector<Eigen::Index> candidate_features() {
    const auto d = static_cast<Eigen::Index>(x.cols());
    std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    if (max_features <= 0 || max_features >= d) return all;
    for (int k = 0; k < max_features; ++k) {
      std::uniform_int_distribution<Eigen::Index> pick(k, d - 1);
      std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
    }
    all.resize(static_cast<std::size_t>(max_features));
    std::sort(all.begin(), all.end());
    return all;
  }

  std::int32_t build(std::vector<Eigen::Index> rows, int depth) {
    double w0 = 0.0;
    double w1 = 0.0;
    for (auto r : rows) (y[r] == 1 ? w1 : w0) += w[r];
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.back().leaf = w1 >= w0 ? Verdict::Adversarial : Verdict::Normal;
    if (depth >= max_depth || w0 <= 0.0 || w1 <= 0.0 || rows.size() < 2) return id;

    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_feature = -1;
    double best_threshold = 0.0;
    for (const Eigen::Index f : candidate_features()) {
      std::sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
        return x(a, f) < x(b, f) || (x(a, f) == x(b, f) && a < b);
      });
      double l0 = 0.0;
      double l1 = 0.0;
      for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        (y[rows[k]] == 1 ? l1 : l0) += w[rows[k]];
        const double lo = x(rows[k], f);
        const double hi = x(rows[k + 1], f);
        if (lo == hi) continue;
        const double impurity = gini_mass(l0, l1) + gini_mass(w0 - l0, w1 - l1);
        if (impurity < best) {
          best = impurity;
          best_feature = f;
          best_threshold = 0.5 * (lo + hi);
          if (best_threshold >= hi) best_threshold = lo;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (auto r : rows) (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
    const std::int32_t l = build(std::move(left), depth + 1);
    const std::int32_t rt = build(std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(best_feature);
    node.threshold = best_threshold;
    node.left = l;
    node.right = rt;
    return id;
  }
};

}  // namespace

DecisionTree fit_tree(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const double> weights,
                      int max_depth, int max_features, std::uint64_t seed) {
  TreeBuilder b{x, y, weights, max_depth, max_features, std::mt19937_64(seed), {}};
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (weights[static_cast<std::size_t>(i)] > 0.0) rows.push_back(i);
  }
  b.build(std::move(rows), 0);
  return std::move(b.tree);
}

namespace detail {

ForestParams train_forest(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config,
                          std::uint64_t seed) {
  if (config.forest_trees < 1 || config.forest_depth < 0) {
    throw Error(ErrorKind::InvalidArgument, "bad forest configuration");
  }
  const Eigen::VectorXd class_w = sample_weights(y, config.class_weighting);
  const int max_features = config.forest_max_features > 0
                               ? config.forest_max_features
                               : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(z.cols())))));
  const auto n = static_cast<std::size_t>(z.rows());
  ForestParams forest;
  for (int t = 0; t < config.forest_trees; ++t) {
    const std::uint64_t tree_seed = seed + static_cast<std::uint64_t>(t) * 0x9e3779b97f4a7c15ULL;
    std::mt19937_64 rng(tree_seed);
    std::vector<double> w(n, 0.0);
    if (config.forest_bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t k = 0; k < n; ++k) w[pick(rng)] += 1.0;
    } else {
      std::fill(w.begin(), w.end(), 1.0);
    }
    for (std::size_t i = 0; i < n; ++i) w[i] *= class_w[static_cast<Eigen::Index>(i)];
    forest.trees.push_back(fit_tree(z, y, w, config.forest_depth, max_features, rng()));
  }
  return forest;
}

}  // namespace detail
}  // namespace advdetect
