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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advdetect/attacks.hpp"
#include "advdetect/codec.hpp"
#include "advdetect/desk_model.hpp"

namespace advdetect {

enum class Origin { Normal, Attack, Imported };

std::string to_string(Origin origin);
Origin parse_origin(const std::string& text);

inline const std::array<std::string, 3> kSplitNames = {"train", "dev", "eval"};

struct ManifestEntry {
  std::string image_id;
  /// Id of the normal image this entry derives from (itself for normals).
  std::string base_id;
  /// Path relative to the manifest's directory.
  std::string path;
  Label ground_truth = 0;
  std::string backend_id;
  Origin origin = Origin::Normal;
  /// Family name for attacks, claimed attack name for imports, empty otherwise.
  std::string attack;
  std::string attack_mode;
  /// Digest of the attack configuration; empty for normals.
  std::string config_digest;
  /// Target label of a targeted attack, -1 otherwise.
  Label target = -1;
  double target_confidence = 0.99;
  Top5 original_top5;
  Top5 post_save_top5;
  std::string split;
  /// sha256 of the file bytes.
  std::string sha256;

  bool is_adversarial() const noexcept { return origin != Origin::Normal; }
  /// Criterion that made this entry adversarial.
  SuccessCriterion criterion() const;
  /// Row-type tag used in reports: "normal" or the attack (plus ":t" when targeted).
  std::string family_tag() const;

  nlohmann::json to_json() const;
  static ManifestEntry from_json(const nlohmann::json& j);
};

/// JSON-lines file: a header object then one entry per line.
struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  std::string codec;
  int suite_version = 0;
  std::string backend_id;
  int num_labels = 0;
  nlohmann::json provenance = nlohmann::json::object();
  std::vector<ManifestEntry> entries;

  std::string to_text() const;
  static DatasetManifest parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);

  const ManifestEntry* find(const std::string& image_id) const;
};

struct SelectedImage {
  LabeledImage image;
  Top5 top5;
};

/// Seeded uniform subset of `count` images whose ground truth is in the
/// backend's top-5, returned in pool order. InsufficientCorrectImages if the
/// pool has too few.
std::vector<SelectedImage> select_normal(const LabeledImages& pool, const Classifier& backend, int count,
                                         std::uint64_t seed, int workers = 1);

/// One (image, attack) attempt.
struct AdversarialCandidate {
  std::size_t base_index = 0;
  std::size_t config_index = 0;
  AttackConfig config;
  bool attack_success = false;
  bool kept = false;
  /// Set when the attempt threw; the batch continues.
  std::string failure;
  Top5 pre_save_top5;
  Top5 post_save_top5;
  Label target = -1;
  /// JPEG-100 bytes exactly as persisted.
  Bytes jpeg;
};

/// The persisted image still satisfies the attack criterion and no longer
/// contains the original top-1 label.
bool keep_adversarial(const SuccessCriterion& criterion, const Top5& post_save);

/// Attack seed for PGD random starts, a function of the run seed and the
/// (image, attack) position only.
std::uint64_t attack_seed(std::uint64_t seed, std::size_t base_index, std::size_t config_index);

/// Runs every configuration on every selected image, persists successes as
/// JPEG-100, re-classifies the decoded bytes, and applies keep_adversarial.
/// Output is ordered by (image, configuration).
std::vector<AdversarialCandidate> generate_adversarial(const std::vector<SelectedImage>& selected,
                                                       const Classifier& backend,
                                                       const std::vector<AttackConfig>& configs, std::uint64_t seed,
                                                       int workers = 1);

/// Assigns whole base-image groups to train/dev/eval. Group counts follow
/// the ratios by largest remainder; groups are stratified by the set of
/// attacks among their derivatives so every attack is spread in proportion.
/// RatioInfeasible when a split with a positive ratio would be empty.
void split_manifest(DatasetManifest& manifest, const std::array<double, 3>& ratios, std::uint64_t seed);

/// Number of base images that each split should receive.
std::array<std::size_t, 3> split_capacities(std::size_t groups, const std::array<double, 3>& ratios);

struct ImportSkip {
  std::string file;
  ErrorKind reason = ErrorKind::VerificationFailed;
  std::string message;
};

struct ImportedImage {
  ManifestEntry entry;
  Bytes bytes;
};

struct ImportResult {
  std::vector<ImportedImage> accepted;
  std::vector<ImportSkip> skipped;
};

inline constexpr std::string_view kImportSidecar = "metadata.jsonl";

/// Ingests externally produced adversarial images described by a
/// metadata.jsonl sidecar with one {"file","original_id","attack",
/// "mode","original_label"[,"target","ground_truth"]} object per line. Each
/// image is re-classified and accepted only if the criterion holds.
/// MetadataMissing when images exist without a sidecar.
ImportResult import_external(const std::filesystem::path& directory, const Classifier& backend, int workers = 1);

/// Checks file digests and re-verifies adversarial entries from their
/// on-disk bytes. Returns one message per problem.
std::vector<std::string> verify_manifest(const DatasetManifest& manifest, const std::filesystem::path& root,
                                         const Classifier& backend, int workers = 1);

}  // namespace advdetect
