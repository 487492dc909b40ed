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

// L2-regularized hinge-loss SVM trained by averaged stochastic subgradient
// epochs. An epoch's averaged iterate is accepted only if it does not raise
// the full objective; otherwise the step scale is halved and the epoch is
// retried from the last accepted point.

#include <numeric>
#include <random>

#include "internal.hpp"

namespace advdetect::detail {

double svm_objective(const Eigen::MatrixXd& z, std::span<const int> y, const Eigen::VectorXd& weights,
                     const LinearParams& p, double lambda) {
  const Eigen::VectorXd scores = (z * p.weights).array() + p.bias;
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double sign = y[i] == 1 ? 1.0 : -1.0;
    hinge += weights[i] * std::max(0.0, 1.0 - sign * scores[i]);
  }
  return 0.5 * lambda * p.weights.squaredNorm() + hinge / weights.sum();
}

LinearParams train_linear_svm(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config,
                              std::uint64_t seed, std::vector<double>* loss_history) {
  const double lambda = config.svm_lambda;
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "svm lambda must be positive");
  const Eigen::VectorXd weights = sample_weights(y, config.class_weighting);
  const auto n = static_cast<std::size_t>(z.rows());

  LinearParams current{Eigen::VectorXd::Zero(z.cols()), 0.0};
  double current_loss = svm_objective(z, y, weights, current, lambda);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  double scale = 1.0;
  long t = 0;

  for (int epoch = 0; epoch < config.svm_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LinearParams w = current;
    LinearParams avg{Eigen::VectorXd::Zero(z.cols()), 0.0};
    long step = t;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      const double eta = scale * config.svm_eta0 / (1.0 + config.svm_eta0 * lambda * static_cast<double>(++step));
      const double sign = y[i] == 1 ? 1.0 : -1.0;
      const double margin = sign * (z.row(i).dot(w.weights) + w.bias);
      w.weights *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        w.weights += (eta * weights[i] * sign) * z.row(i).transpose();
        w.bias += eta * weights[i] * sign;
      }
      avg.weights += w.weights;
      avg.bias += w.bias;
    }
    avg.weights /= static_cast<double>(n);
    avg.bias /= static_cast<double>(n);
    const double loss = svm_objective(z, y, weights, avg, lambda);
    if (loss <= current_loss) {
      current = std::move(avg);
      current_loss = loss;
      t = step;
    } else {
      scale *= 0.5;
    }
    if (loss_history) loss_history->push_back(current_loss);
  }
  return current;
}

}  // namespace advdetect::detail
