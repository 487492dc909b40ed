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

#include "advdetect/desk_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "advdetect/binary_io.hpp"
#include "advdetect/codec.hpp"
#include "advdetect/image_ops.hpp"

namespace advdetect {
namespace {

constexpr std::string_view kMagic = "ADVDESKM";
constexpr std::uint32_t kFormatVersion = 1;

Eigen::MatrixXd stack_inputs(const DeskModel& m, const LabeledImages& data) {
  Eigen::MatrixXd x(m.input_size(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = m.preprocess(data[i].image);
  return x;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p = (z.rowwise() - z.colwise().maxCoeff()).array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

}  // namespace

nlohmann::json DeskTrainConfig::to_json() const {
  return {{"epochs", epochs},   {"learning_rate", learning_rate}, {"momentum", momentum},
          {"weight_decay", weight_decay}, {"batch_size", batch_size}, {"hidden", hidden}, {"seed", seed}};
}

nlohmann::json DeskTrainReport::to_json() const {
  return {{"train_top1", train_top1},
          {"train_top5", train_top5},
          {"validation_top1", validation_top1},
          {"validation_top5", validation_top5},
          {"epoch_loss", epoch_loss}};
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& z) {
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp().matrix();
  return p / p.sum();
}

DeskModel::DeskModel(int width, int height, int num_labels, int hidden, std::uint64_t seed)
    : width_(width), height_(height), seed_(seed) {
  if (num_labels < kTopK + 1) {
    throw Error(ErrorKind::LabelSpaceTooSmall, "desk model needs at least 6 labels");
  }
  if (width < 1 || height < 1 || hidden < 1) throw Error(ErrorKind::InvalidArgument, "bad desk model shape");
  const Eigen::Index d = static_cast<Eigen::Index>(width) * height * Image::kChannels;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  w1_.resize(hidden, d);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d));
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = s1 * normal(rng);
  w2_.resize(num_labels, hidden);
  const double s2 = std::sqrt(1.0 / hidden);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = s2 * normal(rng);
  b1_ = Eigen::VectorXd::Zero(hidden);
  b2_ = Eigen::VectorXd::Zero(num_labels);
}

Eigen::VectorXd DeskModel::preprocess(const Image& img) const {
  if (img.width() == width_ && img.height() == height_) return img.pixels().matrix().array() - 0.5;
  const Image resized = resize_bilinear(img, width_, height_);
  return resized.pixels().matrix().array() - 0.5;
}

Eigen::VectorXd DeskModel::logits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd a1 = (w1_ * x + b1_).cwiseMax(0.0);
  return w2_ * a1 + b2_;
}

Eigen::VectorXd DeskModel::probabilities(const Image& img) const { return softmax(logits(preprocess(img))); }

Top5 DeskModel::classify_top5(const Image& img) const { return top5_from_scores(probabilities(img)); }

void DeskModel::check_native(const Image& img) const {
  if (img.width() != width_ || img.height() != height_) {
    throw Error(ErrorKind::InvalidArgument, "gradients need native " + std::to_string(width_) + "x" +
                                                std::to_string(height_) + " input");
  }
}

double DeskModel::loss(const Image& img, Label label) const {
  check_native(img);
  const Eigen::VectorXd z = logits(preprocess(img));
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum()) - z[label];
}

DeskModel::ForwardBackward DeskModel::forward_backward(const Image& img, Label label) const {
  check_native(img);
  if (label < 0 || label >= num_labels()) throw Error(ErrorKind::InvalidArgument, "label outside label space");
  const Eigen::VectorXd x = preprocess(img);
  const Eigen::VectorXd z1 = w1_ * x + b1_;
  const Eigen::VectorXd a1 = z1.cwiseMax(0.0);
  ForwardBackward out;
  out.probabilities = softmax(w2_ * a1 + b2_);
  Eigen::VectorXd dz2 = out.probabilities;
  dz2[label] -= 1.0;
  const Eigen::VectorXd dz1 = (w2_.transpose() * dz2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
  out.gradient = (w1_.transpose() * dz1).array();
  return out;
}

Eigen::ArrayXd DeskModel::input_gradient(const Image& img, Label label) const {
  return forward_backward(img, label).gradient;
}

std::pair<double, double> DeskModel::accuracy(const LabeledImages& data) const {
  if (data.empty()) return {0.0, 0.0};
  int top1 = 0;
  int top5 = 0;
  for (const auto& item : data) {
    const Top5 t = classify_top5(item.image);
    top1 += t.top1() == item.label;
    top5 += t.contains(item.label);
  }
  const double n = static_cast<double>(data.size());
  return {top1 / n, top5 / n};
}

DeskModel DeskModel::train(const LabeledImages& train, const LabeledImages* validation, const DeskTrainConfig& config,
                           DeskTrainReport* report) {
  if (train.empty()) throw Error(ErrorKind::InvalidArgument, "empty training set");
  const int w = train.front().image.width();
  const int h = train.front().image.height();
  Label max_label = 0;
  std::vector<Label> seen;
  for (const auto& item : train) {
    if (item.image.width() != w || item.image.height() != h) {
      throw Error(ErrorKind::InvalidArgument, "training images must share dimensions");
    }
    if (item.label < 0) throw Error(ErrorKind::InvalidArgument, "negative label");
    max_label = std::max(max_label, item.label);
    if (std::find(seen.begin(), seen.end(), item.label) == seen.end()) seen.push_back(item.label);
  }
  if (seen.size() < 2) throw Error(ErrorKind::ClassMissing, "training needs at least two labels");
  if (config.batch_size < 1 || config.epochs < 0) throw Error(ErrorKind::InvalidArgument, "bad training config");

  DeskModel m(w, h, std::max<int>(max_label + 1, kTopK + 1), config.hidden, config.seed);
  const Eigen::MatrixXd x = stack_inputs(m, train);
  const auto n = static_cast<Eigen::Index>(train.size());

  Eigen::MatrixXd vw1 = Eigen::MatrixXd::Zero(m.w1_.rows(), m.w1_.cols());
  Eigen::VectorXd vb1 = Eigen::VectorXd::Zero(m.b1_.size());
  Eigen::MatrixXd vw2 = Eigen::MatrixXd::Zero(m.w2_.rows(), m.w2_.cols());
  Eigen::VectorXd vb2 = Eigen::VectorXd::Zero(m.b2_.size());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  DeskTrainReport local;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd xb(x.rows(), b);
      Eigen::MatrixXd yb = Eigen::MatrixXd::Zero(m.num_labels(), b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto idx = order[static_cast<std::size_t>(start + j)];
        xb.col(j) = x.col(idx);
        yb(train[static_cast<std::size_t>(idx)].label, j) = 1.0;
      }
      const Eigen::MatrixXd z1 = (m.w1_ * xb).colwise() + m.b1_;
      const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
      const Eigen::MatrixXd p = softmax_columns((m.w2_ * a1).colwise() + m.b2_);
      epoch_loss -= (p.array() * yb.array()).colwise().sum().log().sum();

      const Eigen::MatrixXd dz2 = (p - yb) / static_cast<double>(b);
      const Eigen::MatrixXd dz1 = (m.w2_.transpose() * dz2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
      vw2 = config.momentum * vw2 - config.learning_rate * (dz2 * a1.transpose() + config.weight_decay * m.w2_);
      vb2 = config.momentum * vb2 - config.learning_rate * dz2.rowwise().sum();
      vw1 = config.momentum * vw1 - config.learning_rate * (dz1 * xb.transpose() + config.weight_decay * m.w1_);
      vb1 = config.momentum * vb1 - config.learning_rate * dz1.rowwise().sum();
      m.w2_ += vw2;
      m.b2_ += vb2;
      m.w1_ += vw1;
      m.b1_ += vb1;
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorKind::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch + 1));
    }
    local.epoch_loss.push_back(epoch_loss);
  }

  if (report) {
    std::tie(local.train_top1, local.train_top5) = m.accuracy(train);
    if (validation) std::tie(local.validation_top1, local.validation_top5) = m.accuracy(*validation);
    *report = std::move(local);
  }
  return m;
}

std::vector<std::uint8_t> DeskModel::serialize(const nlohmann::json& metadata) const {
  BinaryWriter out;
  out.put_magic(kMagic);
  out.put_u32(kFormatVersion);
  out.put_string(metadata.dump());
  out.put_u32(static_cast<std::uint32_t>(num_labels()));
  out.put_u32(static_cast<std::uint32_t>(hidden()));
  out.put_u32(static_cast<std::uint32_t>(width_));
  out.put_u32(static_cast<std::uint32_t>(height_));
  out.put_u32(Image::kChannels);
  out.put_u64(seed_);
  out.put_dense(w1_);
  out.put_dense(b1_);
  out.put_dense(w2_);
  out.put_dense(b2_);
  return out.finish();
}

DeskModel DeskModel::deserialize(std::span<const std::uint8_t> bytes, nlohmann::json* metadata) {
  BinaryReader in(bytes);
  in.expect_magic(kMagic);
  if (const auto v = in.u32(); v != kFormatVersion) {
    throw Error(ErrorKind::VersionMismatch, "unsupported desk model format version " + std::to_string(v));
  }
  const std::string meta = in.string();
  if (metadata) *metadata = nlohmann::json::parse(meta);
  DeskModel m;
  const auto k = static_cast<Eigen::Index>(in.u32());
  const auto h = static_cast<Eigen::Index>(in.u32());
  m.width_ = static_cast<int>(in.u32());
  m.height_ = static_cast<int>(in.u32());
  if (in.u32() != Image::kChannels) throw Error(ErrorKind::FormatError, "desk model must have 3 channels");
  if (k < kTopK + 1) throw Error(ErrorKind::LabelSpaceTooSmall, "model label space below 6");
  m.seed_ = in.u64();
  const Eigen::Index d = static_cast<Eigen::Index>(m.width_) * m.height_ * Image::kChannels;
  m.w1_ = in.dense(h, d);
  m.b1_ = in.vector(h);
  m.w2_ = in.dense(k, h);
  m.b2_ = in.vector(k);
  in.expect_end();
  if (!m.w1_.allFinite() || !m.w2_.allFinite() || !m.b1_.allFinite() || !m.b2_.allFinite()) {
    throw Error(ErrorKind::FormatError, "non-finite weights in model file");
  }
  return m;
}

void DeskModel::save(const std::filesystem::path& path, const nlohmann::json& metadata) const {
  write_file(path, serialize(metadata));
}

DeskModel DeskModel::load(const std::filesystem::path& path, nlohmann::json* metadata) {
  return deserialize(read_file(path), metadata);
}

bool operator==(const DeskModel& a, const DeskModel& b) {
  return a.width_ == b.width_ && a.height_ == b.height_ && a.seed_ == b.seed_ && a.w1_.size() == b.w1_.size() &&
         a.w2_.size() == b.w2_.size() && a.w1_ == b.w1_ && a.b1_ == b.b1_ && a.w2_ == b.w2_ && a.b2_ == b.b2_;
}

// ---------------------------------------------------------------------------

namespace {

bool inside_shape(int shape, double dx, double dy, double r) {
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  const double dist = std::hypot(dx, dy);
  switch (shape) {
    case 0: return ax <= 0.8 * r && ay <= 0.8 * r;
    case 1: return dist <= r;
    case 2: return dy >= -r && dy <= r && ax <= 0.5 * (dy + r);
    case 3: return (ax <= r / 3 && ay <= r) || (ay <= r / 3 && ax <= r);
    case 4: return ax <= r && ay <= r / 3;
    case 5: return ay <= r && ax <= r / 3;
    case 6: return dist <= r && dist >= 0.6 * r;
    case 7: return ax + ay <= r;
    case 8: return (std::abs(dx - dy) <= r / 3 || std::abs(dx + dy) <= r / 3) && ax <= r && ay <= r;
    default: return std::max(ax, ay) <= r && std::max(ax, ay) >= 0.6 * r;
  }
}

constexpr double kClassColors[kSyntheticClasses][3] = {
    {0.90, 0.15, 0.15}, {0.15, 0.85, 0.20}, {0.20, 0.30, 0.95}, {0.95, 0.90, 0.15}, {0.90, 0.20, 0.85},
    {0.15, 0.90, 0.90}, {0.95, 0.55, 0.10}, {0.55, 0.20, 0.80}, {0.95, 0.95, 0.95}, {0.60, 0.95, 0.30},
};

}  // namespace

LabeledImages generate_shapes(int count, std::uint64_t seed, const std::string& id_prefix) {
  if (count < 0) throw Error(ErrorKind::InvalidArgument, "negative image count");
  // Faint shapes over a grey background. Each class also fills its shape with
  // a fine stripe texture at its own orientation, fixed to the pixel grid.
  constexpr double kContrast = 0.02;
  constexpr double kTint = 0.03;
  constexpr double kTexture = 0.07;
  constexpr double kTexturePeriod = 5.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);
  LabeledImages out;
  out.reserve(static_cast<std::size_t>(count));
  constexpr int side = kSyntheticSide;
  for (int i = 0; i < count; ++i) {
    const Label label = i % kSyntheticClasses;
    Image img(side, side);
    const double grey = 0.3 + 0.4 * unit(rng);
    double background[3];
    for (double& b : background) b = grey + 0.05 * (unit(rng) - 0.5);
    const double polarity = unit(rng) < 0.5 ? -1.0 : 1.0;
    double color[3];
    for (int c = 0; c < 3; ++c) color[c] = background[c] + polarity * kContrast + kTint * (kClassColors[label][c] - 0.55);
    const double cx = 0.5 * (side - 1) + 6.0 * (unit(rng) - 0.5);
    const double cy = 0.5 * (side - 1) + 6.0 * (unit(rng) - 0.5);
    const double r = 7.0 + 3.0 * unit(rng);
    const double angle = label * std::numbers::pi / kSyntheticClasses;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const bool on = inside_shape(label, x - cx, y - cy, r);
        const double stripe =
            kTexture * std::cos(2.0 * std::numbers::pi * (x * std::cos(angle) + y * std::sin(angle)) / kTexturePeriod);
        for (int c = 0; c < 3; ++c) {
          img.at(y, x, c) = std::clamp((on ? color[c] + stripe : background[c]) + noise(rng), 0.0, 1.0);
        }
      }
    }
    out.push_back({id_prefix + std::to_string(i), std::move(img), label});
  }
  return out;
}

LabeledImages load_labeled_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorKind::MissingInput, "not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  LabeledImages out;
  for (const auto& dir : class_dirs) {
    Label label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(dir.filename().string(), &used);
      if (used != dir.filename().string().size() || label < 0) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      throw Error(ErrorKind::FormatError, "class directory name must be a label id: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      Image img = load_image(file);
      if (!out.empty() && !img.same_shape(out.front().image)) {
        throw Error(ErrorKind::InvalidArgument, "images must share dimensions: " + file.string());
      }
      out.push_back({dir.filename().string() + "/" + file.stem().string(), std::move(img), label});
    }
  }
  return out;
}

}  // namespace advdetect
