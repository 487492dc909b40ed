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

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advdetect/correction.hpp"
#include "advdetect/dataset.hpp"
#include "advdetect/detectors.hpp"

namespace advdetect {

// Each stage reads and writes only its declared files. An output is current
// when its "<output>.stamp" sidecar holds the digest of the stage's inputs
// and configuration; a current stage is skipped unless forced.

struct StageStatus {
  bool skipped = false;
  std::string summary;
};

std::string file_digest(const std::filesystem::path& path);
bool stage_current(const std::filesystem::path& output, const std::string& digest);
void write_stamp(const std::filesystem::path& output, const std::string& digest);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Aligned-text and comma-separated renderings of one table.
struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_text() const;
  std::string to_csv() const;
};

std::string format_fixed(double value, int digits);

std::unique_ptr<Classifier> open_backend(const std::string& selector, const std::optional<std::filesystem::path>& model,
                                         int workers);

// ---------------------------------------------------------------------------

struct DeskStageOptions {
  /// <dir>/<label>/<image>; synthetic shapes when absent.
  std::optional<std::filesystem::path> data_dir;
  int train_count = 2000;
  int test_count = 1000;
  std::uint64_t data_seed = 1;
  DeskTrainConfig train;
  std::filesystem::path model_out;
  std::optional<std::filesystem::path> report_dir;
  bool force = false;
};

StageStatus train_desk_stage(const DeskStageOptions& options, nlohmann::json* report = nullptr);

struct BuildOptions {
  std::string backend = "desk";
  std::optional<std::filesystem::path> model;
  /// Labelled pool directory; synthetic shapes when absent.
  std::optional<std::filesystem::path> pool_dir;
  int pool_count = 1500;
  std::uint64_t pool_seed = 2;
  int normal_count = 100;
  std::vector<std::string> attacks = {"bim", "pgd"};
  AttackConfig attack_defaults;
  std::array<double, 3> ratios = {7.0, 1.5, 1.5};
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> import_dir;
  /// Receives manifest.jsonl and images/.
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> report_dir;
  int workers = 1;
  bool force = false;
};

inline constexpr std::string_view kManifestName = "manifest.jsonl";

StageStatus build_dataset_stage(const BuildOptions& options, nlohmann::json* report = nullptr);

/// Traces of every manifest entry in manifest order, cached next to the
/// manifest per backend and recomputed when the manifest changes.
std::vector<LabelTrace> ensure_traces(const std::filesystem::path& manifest_path, const Classifier& backend,
                                      int workers, bool force = false);

// ---------------------------------------------------------------------------

/// Default measure-effects columns: the reported selection of the suite plus
/// JPEG quality 20.
const std::vector<std::string>& default_effect_ops();

/// Number of images per row type whose ground truth is not in the top-5,
/// before ("Original") and after each operation.
struct EffectsTable {
  std::vector<std::string> operations;
  std::vector<std::string> row_types;
  std::vector<int> totals;
  /// counts[row][0] is the original column; counts[row][1 + k] is operation k.
  std::vector<std::vector<int>> counts;

  nlohmann::json to_json() const;
  static EffectsTable from_json(const nlohmann::json& j);
  TextTable table() const;
};

EffectsTable measure_effects(const DatasetManifest& manifest, const std::filesystem::path& root,
                             const Classifier& backend, const std::vector<OperationSpec>& ops, int workers = 1);

struct EffectsOptions {
  std::filesystem::path manifest;
  std::string backend = "desk";
  std::optional<std::filesystem::path> model;
  std::vector<std::string> ops = default_effect_ops();
  std::filesystem::path report_dir;
  int workers = 1;
  bool force = false;
};

StageStatus measure_effects_stage(const EffectsOptions& options, EffectsTable* out = nullptr);

// ---------------------------------------------------------------------------

FeatureTable build_feature_table(const DatasetManifest& manifest, const std::vector<LabelTrace>& traces,
                                 FeatureKind kind, const OperationSubset& subset);

struct FeatureOptions {
  std::filesystem::path manifest;
  std::string backend = "desk";
  std::optional<std::filesystem::path> model;
  FeatureKind kind = FeatureKind::Differences;
  std::string subset = "all";
  std::filesystem::path out;
  int workers = 1;
  bool force = false;
};

StageStatus extract_features_stage(const FeatureOptions& options);

struct DetectorOptions {
  std::filesystem::path features;
  DetectorKind kind = DetectorKind::LDA;
  DetectorConfig config;
  /// Picks the main regularizer on the dev split.
  bool select_on_dev = true;
  std::uint64_t seed = 1;
  std::filesystem::path model_out;
  bool force = false;
};

StageStatus train_detector_stage(const DetectorOptions& options);

struct EvaluateOptions {
  std::filesystem::path model;
  std::filesystem::path features;
  std::string split = "eval";
  /// Subsample the larger class to the smaller one with this seed.
  std::optional<std::uint64_t> balance_seed;
  std::filesystem::path report_dir;
  bool force = false;
};

/// Report file of one (detector, feature, subset) evaluation.
std::filesystem::path detection_report_path(const std::filesystem::path& report_dir, DetectorKind kind,
                                            FeatureKind feature, const std::string& subset);

StageStatus evaluate_detector_stage(const EvaluateOptions& options, EvalReport* out = nullptr);

// ---------------------------------------------------------------------------

struct CorrectionRow {
  std::string subset_id;
  int normal_total = 0;
  int normal_corrected = 0;
  int adversarial_total = 0;
  int adversarial_corrected = 0;
  /// Per attack family: {total, corrected}.
  std::map<std::string, std::pair<int, int>> per_family;

  /// Percentages (0..100); 0 when there are no rows.
  double normal_rate() const;
  double adversarial_rate() const;
};

struct CorrectionSummary {
  std::string split;
  CorrectionMatch match = CorrectionMatch::Top1InTop5;
  std::vector<CorrectionRow> rows;

  const CorrectionRow& row(const std::string& subset_id) const;
  nlohmann::json to_json() const;
  static CorrectionSummary from_json(const nlohmann::json& j);
  TextTable table() const;
};

/// References are each entry's original top-5: for normals their own, for
/// adversarial images that of the base image before the attack.
CorrectionSummary summarize_correction(const DatasetManifest& manifest, const std::vector<LabelTrace>& traces,
                                       const std::vector<std::string>& subsets, const std::string& split,
                                       CorrectionMatch match);

struct CorrectionOptions {
  std::filesystem::path manifest;
  std::string backend = "desk";
  std::optional<std::filesystem::path> model;
  std::vector<std::string> subsets = {"jpeg", "scaling", "jpeg+scaling"};
  /// "train", "dev", "eval" or "all".
  std::string split = "eval";
  CorrectionMatch match = CorrectionMatch::Top1InTop5;
  std::filesystem::path report_dir;
  int workers = 1;
  bool force = false;
};

StageStatus correct_stage(const CorrectionOptions& options, CorrectionSummary* out = nullptr);

// ---------------------------------------------------------------------------

/// Renders effects, detection and correction results found in the report
/// directory to report.txt plus one CSV per table. VersionMismatch when the
/// inputs come from different tool versions.
StageStatus report_stage(const std::filesystem::path& report_dir);

}  // namespace advdetect
