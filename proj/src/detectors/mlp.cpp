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

// One hidden ReLU layer, logistic output, class-weighted binary
// cross-entropy, minibatch SGD with momentum.

#include <cmath>
#include <numeric>
#include <random>

#include "internal.hpp"

namespace advdetect::detail {

double mlp_logit(const MlpParams& p, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  const Eigen::VectorXd a = (p.w1 * z.transpose() + p.b1).cwiseMax(0.0);
  return a.dot(p.w2) + p.b2;
}

MlpParams train_mlp(const Eigen::MatrixXd& z, std::span<const int> y, const DetectorConfig& config,
                    std::uint64_t seed) {
  const Eigen::Index d = z.cols();
  const int h = config.mlp_hidden;
  if (h < 1 || config.mlp_batch_size < 1) throw Error(ErrorKind::InvalidArgument, "bad MLP configuration");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpParams p;
  p.w1.resize(h, d);
  const double s1 = std::sqrt(2.0 / static_cast<double>(std::max<Eigen::Index>(1, d)));
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = s1 * normal(rng);
  p.b1 = Eigen::VectorXd::Zero(h);
  p.w2.resize(h);
  const double s2 = std::sqrt(1.0 / h);
  for (Eigen::Index i = 0; i < h; ++i) p.w2[i] = s2 * normal(rng);
  p.b2 = 0.0;

  const Eigen::VectorXd weights = sample_weights(y, config.class_weighting);
  Eigen::MatrixXd vw1 = Eigen::MatrixXd::Zero(h, d);
  Eigen::VectorXd vb1 = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd vw2 = Eigen::VectorXd::Zero(h);
  double vb2 = 0.0;

  const auto n = static_cast<Eigen::Index>(z.rows());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double lr = config.mlp_learning_rate;
  const double mu = config.mlp_momentum;
  for (int epoch = 0; epoch < config.mlp_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += config.mlp_batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.mlp_batch_size, n - start);
      Eigen::MatrixXd xb(d, b);
      Eigen::RowVectorXd yb(b);
      Eigen::RowVectorXd wb(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto i = order[static_cast<std::size_t>(start + j)];
        xb.col(j) = z.row(i).transpose();
        yb[j] = y[i];
        wb[j] = weights[i];
      }
      const Eigen::MatrixXd z1 = (p.w1 * xb).colwise() + p.b1;
      const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
      const Eigen::RowVectorXd logit = (p.w2.transpose() * a1).array() + p.b2;
      const Eigen::RowVectorXd prob = (1.0 + (-logit.array()).exp()).inverse();
      const Eigen::RowVectorXd dlogit = ((prob - yb).array() * wb.array()) / static_cast<double>(b);
      const Eigen::MatrixXd dz1 = (p.w2 * dlogit).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
      vw2 = mu * vw2 - lr * (a1 * dlogit.transpose());
      vb2 = mu * vb2 - lr * dlogit.sum();
      vw1 = mu * vw1 - lr * (dz1 * xb.transpose());
      vb1 = mu * vb1 - lr * dz1.rowwise().sum();
      p.w2 += vw2;
      p.b2 += vb2;
      p.w1 += vw1;
      p.b1 += vb1;
    }
    if (!p.w1.allFinite() || !std::isfinite(p.b2)) {
      throw Error(ErrorKind::NonFiniteLoss, "MLP detector diverged at epoch " + std::to_string(epoch + 1));
    }
  }
  return p;
}

}  // namespace advdetect::detail
