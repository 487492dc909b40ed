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

// Two-class linear discriminant with a pooled, shrunk covariance.

#include <Eigen/Cholesky>

#include <cmath>

#include "internal.hpp"

namespace advdetect::detail {

LinearParams train_lda(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config) {
  const Eigen::Index d = z.cols();
  Eigen::RowVectorXd mean[2] = {Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Zero(d)};
  double count[2] = {0, 0};
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    mean[y[i]] += z.row(i);
    count[y[i]] += 1;
  }
  for (int c = 0; c < 2; ++c) mean[c] /= count[c];

  Eigen::MatrixXd centered(z.rows(), d);
  for (Eigen::Index i = 0; i < z.rows(); ++i) centered.row(i) = z.row(i) - mean[y[i]];
  const double dof = std::max(1.0, static_cast<double>(z.rows()) - 2.0);
  Eigen::MatrixXd cov = (centered.transpose() * centered) / dof;

  const double lambda = std::clamp(config.lda_shrinkage, 0.0, 1.0);
  const Eigen::VectorXd diag = cov.diagonal();
  cov *= (1.0 - lambda);
  cov.diagonal() += lambda * diag;
  // Constant columns carry no information; give them unit variance so the
  // system stays solvable without touching the informative block.
  for (Eigen::Index k = 0; k < d; ++k) {
    if (diag[k] <= 1e-12) {
      cov.row(k).setZero();
      cov.col(k).setZero();
      cov(k, k) = 1.0;
    }
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || pivots.minCoeff() <= 1e-12 * std::max(1.0, pivots.maxCoeff())) {
    throw Error(ErrorKind::SingularCovariance, "pooled covariance is singular after shrinkage");
  }

  LinearParams p;
  p.weights = ldlt.solve((mean[1] - mean[0]).transpose());
  const double prior_log_odds = config.class_weighting ? 0.0 : std::log(count[1] / count[0]);
  p.bias = -0.5 * (mean[0] + mean[1]).dot(p.weights.transpose()) + prior_log_odds;
  return p;
}

}  // namespace advdetect::detail
