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

#include "advdetect/top5.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "advdetect/error.hpp"

namespace advdetect {

bool Top5::contains(Label label) const noexcept {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

Top5 top5_from_scores(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  if (scores.size() < kTopK + 1) {
    throw Error(ErrorKind::LabelSpaceTooSmall, "need at least 6 labels, got " + std::to_string(scores.size()));
  }
  std::vector<Label> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + kTopK, order.end(), [&](Label a, Label b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  Top5 t;
  for (int i = 0; i < kTopK; ++i) {
    t.labels[i] = order[i];
    t.confidences[i] = scores[order[i]];
  }
  return t;
}

bool top5_correct(const Top5& t, Label ground_truth) noexcept { return t.contains(ground_truth); }

void check_top5(const Top5& t, int num_labels) {
  for (int i = 0; i < kTopK; ++i) {
    if (t.labels[i] < 0 || t.labels[i] >= num_labels) {
      throw Error(ErrorKind::ProtocolViolation, "label id out of range: " + std::to_string(t.labels[i]));
    }
    for (int j = 0; j < i; ++j) {
      if (t.labels[i] == t.labels[j]) throw Error(ErrorKind::ProtocolViolation, "duplicate label in top-5");
    }
    const double c = t.confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw Error(ErrorKind::ProtocolViolation, "confidence outside [0,1]");
    if (i > 0 && c > t.confidences[i - 1]) {
      throw Error(ErrorKind::ProtocolViolation, "confidences must be non-increasing");
    }
  }
}

nlohmann::json to_json(const Top5& t) { return {{"labels", t.labels}, {"confidences", t.confidences}}; }

Top5 top5_from_json(const nlohmann::json& j) {
  Top5 t;
  const auto labels = j.at("labels").get<std::vector<Label>>();
  const auto conf = j.at("confidences").get<std::vector<double>>();
  if (labels.size() != kTopK || conf.size() != kTopK) throw Error(ErrorKind::FormatError, "top-5 needs 5 entries");
  std::copy(labels.begin(), labels.end(), t.labels.begin());
  std::copy(conf.begin(), conf.end(), t.confidences.begin());
  return t;
}

}  // namespace advdetect
