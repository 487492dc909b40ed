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

#include <span>
#include <vector>

#include "advdetect/detectors.hpp"

namespace advdetect::detail {

/// Per-row weights: inverse class frequency normalised to mean 1, or all 1.
Eigen::VectorXd sample_weights(std::span<const int> y, bool class_weighting);

// Each trainer receives standardized rows.
LinearParams train_lda(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config);
LinearParams train_linear_svm(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config,
                              std::uint64_t seed, std::vector<double>* loss_history);
MlpParams train_mlp(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config,
                    std::uint64_t seed);
ForestParams train_forest(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config,
                          std::uint64_t seed);

/// Regularized hinge objective of the linear SVM.
double svm_objective(const Eigen::MatrixXd& z, std::span<const int> y, const Eigen::VectorXd& weights,
                     const LinearParams& p, double lambda);

double mlp_logit(const MlpParams& p, const Eigen::Ref<const Eigen::RowVectorXd>& z);

}  // namespace advdetect::detail
