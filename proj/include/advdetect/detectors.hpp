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

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "advdetect/features.hpp"

namespace advdetect {

enum class DetectorKind { LDA, LinearSVM, MLP, RandomForest };

std::string to_string(DetectorKind kind);
DetectorKind parse_detector_kind(const std::string& text);

enum class Verdict { Normal = 0, Adversarial = 1 };

struct DetectorConfig {
  /// Weights each class by the inverse of its frequency.
  bool class_weighting = true;
  double lda_shrinkage = 0.1;
  double svm_lambda = 1e-3;
  int svm_epochs = 40;
  double svm_eta0 = 0.1;
  int mlp_hidden = 100;
  int mlp_epochs = 40;
  double mlp_learning_rate = 0.01;
  double mlp_momentum = 0.9;
  int mlp_batch_size = 32;
  int forest_trees = 100;
  int forest_depth = 2;
  /// Features tried per split; 0 means round(sqrt(d)).
  int forest_max_features = 0;
  bool forest_bootstrap = true;

  nlohmann::json to_json() const;
  static DetectorConfig from_json(const nlohmann::json& j);
};

/// Z-score parameters fitted on training rows; constant columns get scale 1.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct LinearParams {
  Eigen::VectorXd weights;
  double bias = 0;
};

struct MlpParams {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0;
};

struct TreeNode {
  /// -1 for a leaf.
  std::int32_t feature = -1;
  double threshold = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  Verdict leaf = Verdict::Adversarial;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  Verdict predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct ForestParams {
  std::vector<DecisionTree> trees;
};

/// Binary normal-vs-adversarial classifier over one feature kind and
/// operation subset.
class DetectorModel {
 public:
  DetectorKind kind() const noexcept { return kind_; }
  FeatureKind feature_kind() const noexcept { return feature_kind_; }
  const std::string& subset_id() const noexcept { return subset_id_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(standardizer_.mean.size()); }
  std::uint64_t seed() const noexcept { return seed_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const auto& params() const noexcept { return params_; }

  /// Throws FeatureMismatch if kind, subset, or length differ from training.
  Verdict predict(const FeatureVector& f) const;
  /// Prediction for a raw (unstandardized) row.
  Verdict predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& raw) const;
  std::vector<Verdict> predict_rows(const Eigen::MatrixXd& raw) const;

  std::vector<std::uint8_t> serialize(const nlohmann::json& metadata) const;
  static DetectorModel deserialize(std::span<const std::uint8_t> bytes, nlohmann::json* metadata = nullptr);
  void save(const std::filesystem::path& path, const nlohmann::json& metadata) const;
  static DetectorModel load(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

 private:
  friend DetectorModel train_detector(DetectorKind, const Eigen::MatrixXd&, std::span<const int>, FeatureKind,
                                      const std::string&, const DetectorConfig&, std::uint64_t,
                                      std::vector<double>*);

  DetectorKind kind_ = DetectorKind::LDA;
  FeatureKind feature_kind_ = FeatureKind::Counting;
  std::string subset_id_;
  std::uint64_t seed_ = 0;
  Standardizer standardizer_;
  std::variant<LinearParams, MlpParams, ForestParams> params_;
};

/// Trains on rows of `x` with labels y (1 adversarial, 0 normal). For the
/// linear SVM, `loss_history` receives the objective after every epoch.
DetectorModel train_detector(DetectorKind kind, const Eigen::MatrixXd& x, std::span<const int> y,
                             FeatureKind feature_kind, const std::string& subset_id, const DetectorConfig& config,
                             std::uint64_t seed, std::vector<double>* loss_history = nullptr);

/// Design matrix and labels of a feature table split ("" = every row).
std::pair<Eigen::MatrixXd, std::vector<int>> design_matrix(const std::vector<FeatureRow>& rows);

DetectorModel train_detector(DetectorKind kind, const FeatureTable& table, const DetectorConfig& config,
                             std::uint64_t seed, std::vector<double>* loss_history = nullptr);

/// Trains candidates over a small grid of the kind's main regularizer and
/// keeps the one with the best dev accuracy (first on ties).
DetectorModel select_on_dev(DetectorKind kind, const FeatureTable& table, const DetectorConfig& config,
                            std::uint64_t seed, nlohmann::json* selection_log = nullptr);

/// Single decision tree fit used by the forest; exposed for testing.
DecisionTree fit_tree(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const double> weights,
                      int max_depth, int max_features, std::uint64_t seed);

struct FamilyStats {
  int total = 0;
  int correct = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct EvalReport {
  std::string split;
  /// confusion[truth][predicted], 0 = normal, 1 = adversarial.
  std::array<std::array<int, 2>, 2> confusion{};
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double false_positive_rate = 0;
  std::map<std::string, FamilyStats> per_family;

  int total() const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_text() const;
};

/// Metrics of the model on the rows; EmptySplit if there are none.
EvalReport evaluate(const DetectorModel& model, const std::vector<FeatureRow>& rows, const std::string& split);

/// Subsamples the larger class (seeded) so both classes have equal counts.
std::vector<FeatureRow> balance_rows(const std::vector<FeatureRow>& rows, std::uint64_t seed);

}  // namespace advdetect
