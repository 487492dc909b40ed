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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advdetect/image.hpp"
#include "advdetect/top5.hpp"

namespace advdetect {

struct LabeledImage {
  std::string id;
  Image image;
  Label label = 0;
};

using LabeledImages = std::vector<LabeledImage>;

struct DeskTrainConfig {
  int epochs = 30;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 32;
  int hidden = 128;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
};

struct DeskTrainReport {
  double train_top1 = 0;
  double train_top5 = 0;
  double validation_top1 = 0;
  double validation_top5 = 0;
  std::vector<double> epoch_loss;

  nlohmann::json to_json() const;
};

/// Input-flatten -> dense(h) -> ReLU -> dense(K) -> softmax over images of
/// a fixed native size. Weights are read-only after training, so inference
/// and gradients may run concurrently.
class DeskModel {
 public:
  DeskModel() = default;

  /// He-initialised model; deterministic in `seed`.
  DeskModel(int width, int height, int num_labels, int hidden, std::uint64_t seed);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int num_labels() const noexcept { return static_cast<int>(b2_.size()); }
  int hidden() const noexcept { return static_cast<int>(b1_.size()); }
  Eigen::Index input_size() const noexcept { return w1_.cols(); }
  std::uint64_t seed() const noexcept { return seed_; }

  const Eigen::MatrixXd& w1() const noexcept { return w1_; }
  const Eigen::VectorXd& b1() const noexcept { return b1_; }
  const Eigen::MatrixXd& w2() const noexcept { return w2_; }
  const Eigen::VectorXd& b2() const noexcept { return b2_; }

  /// Flattened, centred network input; images of another size are first
  /// resized bilinearly to the native size.
  Eigen::VectorXd preprocess(const Image& img) const;

  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd probabilities(const Image& img) const;
  Top5 classify_top5(const Image& img) const;

  /// Cross-entropy -log p_label of a native-size image.
  double loss(const Image& img, Label label) const;

  /// d(-log p_label)/d(pixel) for a native-size image, interleaved like
  /// Image::pixels().
  Eigen::ArrayXd input_gradient(const Image& img, Label label) const;

  /// Probabilities and input gradient from one forward/backward pass.
  struct ForwardBackward {
    Eigen::VectorXd probabilities;
    Eigen::ArrayXd gradient;
  };
  ForwardBackward forward_backward(const Image& img, Label label) const;

  static DeskModel train(const LabeledImages& train, const LabeledImages* validation, const DeskTrainConfig& config,
                         DeskTrainReport* report = nullptr);

  /// Top-1 and top-5 accuracy over a labelled set.
  std::pair<double, double> accuracy(const LabeledImages& data) const;

  std::vector<std::uint8_t> serialize(const nlohmann::json& metadata) const;
  static DeskModel deserialize(std::span<const std::uint8_t> bytes, nlohmann::json* metadata = nullptr);

  void save(const std::filesystem::path& path, const nlohmann::json& metadata) const;
  static DeskModel load(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

  friend bool operator==(const DeskModel& a, const DeskModel& b);

 private:
  void check_native(const Image& img) const;

  int width_ = 0;
  int height_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;
  Eigen::VectorXd b2_;
};

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& z);

// ---------------------------------------------------------------------------
// Desk datasets

inline constexpr int kSyntheticClasses = 10;
inline constexpr int kSyntheticSide = 32;

/// Ten classes of faint, tinted shapes filled with a class-oriented stripe
/// texture on a noisy grey background, with position, size and polarity
/// jitter. Label = i mod 10, ids "<prefix><i>".
LabeledImages generate_shapes(int count, std::uint64_t seed, const std::string& id_prefix = "s");

/// Reads <root>/<label>/<file>.{png,jpg,jpeg}; every image must share one size.
LabeledImages load_labeled_directory(const std::filesystem::path& root);

}  // namespace advdetect
