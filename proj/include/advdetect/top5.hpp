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

#include <array>
#include <cstdint>

#include <json.hpp>

namespace advdetect {

/// Opaque class id owned by a classifier backend.
using Label = std::int32_t;

inline constexpr int kTopK = 5;

/// Ordered top-5 prediction (a, b, c, d, e) with non-increasing confidences.
struct Top5 {
  std::array<Label, kTopK> labels{};
  std::array<double, kTopK> confidences{};

  Label top1() const noexcept { return labels[0]; }
  bool contains(Label label) const noexcept;

  friend bool operator==(const Top5&, const Top5&) = default;
};

/// Top-5 of a score vector; equal scores are ordered by lower label id.
Top5 top5_from_scores(const Eigen::Ref<const Eigen::VectorXd>& scores);

/// True iff the ground truth is among the five predicted labels.
bool top5_correct(const Top5& t, Label ground_truth) noexcept;

/// Throws ProtocolViolation unless labels are distinct ids in [0, num_labels)
/// and confidences lie in [0,1] in non-increasing order.
void check_top5(const Top5& t, int num_labels);

nlohmann::json to_json(const Top5& t);
/// FormatError unless both arrays have five entries.
Top5 top5_from_json(const nlohmann::json& j);

}  // namespace advdetect
