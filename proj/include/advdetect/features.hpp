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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "advdetect/classifier.hpp"
#include "advdetect/image_ops.hpp"
#include "advdetect/top5.hpp"

namespace advdetect {

/// Top-5 labels of one image before (base) and after each suite operation
/// (post, in suite order).
struct LabelTrace {
  std::string image_id;
  std::string backend_id;
  Top5 base;
  std::vector<Top5> post;

  nlohmann::json to_json() const;
  static LabelTrace from_json(const nlohmann::json& j);
};

/// Named list of 0-based suite positions.
struct OperationSubset {
  std::string id;
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
};

/// One of jpeg (16), blur (4), rotation (8), scaling (10), jpeg+scaling
/// (26), all (38), defined over the canonical suite.
OperationSubset canonical_subset(const std::string& id);
const std::vector<std::string>& canonical_subset_ids();

/// Every position of a trace, for suites other than the canonical one.
OperationSubset full_subset(std::size_t n, std::string id = "all");

/// base = classify(img); post[i] = classify(apply(suite[i], img)).
LabelTrace trace(const Image& img, const Classifier& backend, const OperationSuite& suite,
                 const std::string& image_id = {});

enum class FeatureKind { Counting, Differences };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& text);

struct FeatureVector {
  FeatureKind kind = FeatureKind::Counting;
  std::string subset_id;
  std::string backend_id;
  std::vector<std::int32_t> values;
};

/// Per position p, the number of subset operations whose label at p equals
/// the base label at p.
FeatureVector counting_feature(const LabelTrace& t, const OperationSubset& subset);

/// For each subset operation, five flags: 1 where the label at that
/// position changed, 0 where it did not.
FeatureVector differences_feature(const LabelTrace& t, const OperationSubset& subset);

FeatureVector extract_feature(const LabelTrace& t, const OperationSubset& subset, FeatureKind kind);

// ---------------------------------------------------------------------------
// Feature matrix file: '#'-prefixed provenance lines, then a CSV header
// (image_id,split,is_adversarial,attack_family,backend_id,subset_id,f0..)
// and one row per image.

struct FeatureRow {
  std::string image_id;
  std::string split;
  bool is_adversarial = false;
  std::string attack_family;
  std::string backend_id;
  std::vector<std::int32_t> values;
};

struct FeatureTable {
  FeatureKind kind = FeatureKind::Counting;
  std::string subset_id;
  nlohmann::json provenance;
  std::vector<FeatureRow> rows;

  std::size_t dimension() const { return rows.empty() ? 0 : rows.front().values.size(); }
  std::vector<FeatureRow> split_rows(const std::string& split) const;
};

std::string write_feature_table(const FeatureTable& table);
FeatureTable parse_feature_table(const std::string& text);

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable load_feature_table(const std::filesystem::path& path);

}  // namespace advdetect
