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

#include <algorithm>
#include <filesystem>
#include <memory>
#include <numeric>
#include <random>
#include <string>

#include "advdetect/classifier.hpp"
#include "advdetect/desk_model.hpp"
#include "advdetect/features.hpp"
#include "advdetect/image.hpp"

namespace advdetect::testing {

inline Image random_image(std::mt19937_64& rng, int width, int height) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(width, height);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.pixels()[i] = unit(rng);
  return img;
}

/// Top-5 of distinct labels drawn from [0, num_labels), confidences descending.
inline Top5 random_top5(std::mt19937_64& rng, int num_labels) {
  std::vector<Label> all(static_cast<std::size_t>(num_labels));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  Top5 t;
  for (int k = 0; k < kTopK; ++k) {
    t.labels[k] = all[static_cast<std::size_t>(k)];
    t.confidences[k] = 0.5 / (k + 1);
  }
  return t;
}

/// Trace whose post tuples copy the base with probability `keep` per slot
/// and are otherwise redrawn; small label spaces force heavy collisions.
inline LabelTrace random_trace(std::mt19937_64& rng, std::size_t n, int num_labels, double keep = 0.5) {
  std::bernoulli_distribution same(keep);
  LabelTrace t;
  t.image_id = "t";
  t.base = random_top5(rng, num_labels);
  for (std::size_t i = 0; i < n; ++i) t.post.push_back(same(rng) ? t.base : random_top5(rng, num_labels));
  return t;
}

/// Desk model trained once per test binary on a small synthetic set.
inline std::shared_ptr<const DeskModel> small_desk_model() {
  static const std::shared_ptr<const DeskModel> model = [] {
    DeskTrainConfig cfg;
    cfg.epochs = 15;
    return std::make_shared<const DeskModel>(DeskModel::train(generate_shapes(800, 11, "train"), nullptr, cfg));
  }();
  return model;
}

inline const DeskBackend& small_desk_backend() {
  static const DeskBackend backend(small_desk_model(), "desk-test");
  return backend;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("advdetect_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace advdetect::testing
