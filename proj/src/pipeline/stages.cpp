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

#include <map>
#include <random>
#include <set>

#include "advdetect/parallel.hpp"
#include "advdetect/pipeline.hpp"
#include "advdetect/provenance.hpp"

namespace advdetect {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pool and training images behave as if read back from 8-bit files.
void snap_to_8bit(LabeledImages& images) {
  for (auto& li : images) li.image = dequantize<double>(quantize(li.image));
}

std::string file_safe(std::string id) {
  for (char& ch : id) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return id;
}

json directory_digest(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingInput, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  json j = json::object();
  for (const auto& f : files) j[fs::relative(f, dir).generic_string()] = file_digest(f);
  return config_digest(j);
}

void save_json_report(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace

// ---------------------------------------------------------------------------

StageStatus train_desk_stage(const DeskStageOptions& o, json* report) {
  json data;
  if (o.data_dir) {
    data = {{"directory", directory_digest(*o.data_dir)}, {"seed", o.data_seed}};
  } else {
    data = {{"synthetic", kSyntheticClasses}, {"train", o.train_count}, {"test", o.test_count}, {"seed", o.data_seed}};
  }
  const json key{{"stage", "train-desk-model"}, {"data", data}, {"train", o.train.to_json()}};
  const std::string digest = config_digest(key);
  if (!o.force && stage_current(o.model_out, digest)) return {true, "desk model is up to date"};

  LabeledImages train;
  LabeledImages test;
  if (o.data_dir) {
    LabeledImages all = load_labeled_directory(*o.data_dir);
    std::mt19937_64 rng(o.data_seed);
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t n_train = all.size() * 4 / 5;
    train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  } else {
    train = generate_shapes(o.train_count, o.data_seed, "t");
    test = generate_shapes(o.test_count, o.data_seed + 1, "v");
    snap_to_8bit(train);
    snap_to_8bit(test);
  }
  DeskTrainReport train_report;
  const DeskModel model = DeskModel::train(train, test.empty() ? nullptr : &test, o.train, &train_report);
  const json meta{{"provenance", provenance(key, {{"data", o.data_seed}, {"init", o.train.seed}})},
                  {"train_report", train_report.to_json()},
                  {"train_images", train.size()},
                  {"test_images", test.size()}};
  model.save(o.model_out, meta);
  if (o.report_dir) save_json_report(*o.report_dir / "desk_model.json", meta);
  write_stamp(o.model_out, digest);
  if (report) *report = meta;
  return {false, "desk model: test top-1 " + format_fixed(train_report.validation_top1, 4) + ", top-5 " +
                     format_fixed(train_report.validation_top5, 4)};
}

// ---------------------------------------------------------------------------

StageStatus build_dataset_stage(const BuildOptions& o, json* report) {
  const fs::path manifest_path = o.out_dir / kManifestName;
  std::vector<AttackConfig> configs;
  json attack_json = json::array();
  for (const auto& spec : o.attacks) {
    configs.push_back(parse_attack_spec(spec, o.attack_defaults));
    configs.back().validate();
    attack_json.push_back(configs.back().to_json());
  }
  json pool;
  if (o.pool_dir) {
    pool = {{"directory", directory_digest(*o.pool_dir)}};
  } else {
    pool = {{"synthetic", kSyntheticClasses}, {"count", o.pool_count}, {"seed", o.pool_seed}};
  }
  const json key{{"stage", "build-dataset"},
                 {"backend", o.backend},
                 {"model", o.model ? file_digest(*o.model) : ""},
                 {"pool", pool},
                 {"normal_count", o.normal_count},
                 {"attacks", attack_json},
                 {"ratios", o.ratios},
                 {"seed", o.seed},
                 {"import", o.import_dir ? directory_digest(*o.import_dir) : json()}};
  const std::string digest = config_digest(key);
  if (!o.force && stage_current(manifest_path, digest)) return {true, "manifest is up to date"};

  const auto backend = open_backend(o.backend, o.model, o.workers);
  LabeledImages images;
  if (o.pool_dir) {
    images = load_labeled_directory(*o.pool_dir);
    for (auto& li : images) li.id = file_safe(li.id);
  } else {
    images = generate_shapes(o.pool_count, o.pool_seed, "n");
    snap_to_8bit(images);
  }
  const auto selected = select_normal(images, *backend, o.normal_count, o.seed, o.workers);
  const auto candidates = generate_adversarial(selected, *backend, configs, o.seed, o.workers);

  std::set<std::string> tags;
  for (const auto& c : configs) tags.insert(c.tag());
  const bool unique_tags = tags.size() == configs.size();

  fs::remove_all(o.out_dir / "images");
  DatasetManifest manifest;
  manifest.codec = codec_info();
  manifest.suite_version = kSuiteVersion;
  manifest.backend_id = backend->id();
  manifest.num_labels = backend->num_labels();
  manifest.provenance = provenance(key, {{"selection", o.seed}, {"attack", o.seed}, {"split", o.seed}});

  for (const auto& s : selected) {
    ManifestEntry e;
    e.image_id = s.image.id;
    e.base_id = s.image.id;
    e.path = "images/normal/" + s.image.id + ".png";
    e.ground_truth = s.image.label;
    e.backend_id = backend->id();
    e.origin = Origin::Normal;
    const Bytes png = encode_png(quantize(s.image.image));
    e.original_top5 = s.top5;
    e.post_save_top5 = backend->classify_top5(dequantize<double>(decode_png(png)));
    e.sha256 = sha256_hex(png);
    write_file(o.out_dir / e.path, png);
    manifest.entries.push_back(std::move(e));
  }

  struct FamilyCount {
    int attempted = 0;
    int success = 0;
    int kept = 0;
    int failed = 0;
  };
  std::map<std::string, FamilyCount> family_counts;
  json failures = json::array();
  for (const auto& c : candidates) {
    const std::string tag = configs[c.config_index].tag();
    auto& fc = family_counts[tag];
    ++fc.attempted;
    fc.success += c.attack_success;
    fc.kept += c.kept;
    if (!c.failure.empty()) {
      ++fc.failed;
      failures.push_back({{"image_id", selected[c.base_index].image.id}, {"attack", tag}, {"error", c.failure}});
    }
    if (!c.kept) continue;
    const SelectedImage& base = selected[c.base_index];
    ManifestEntry e;
    e.image_id = base.image.id + "_" + (unique_tags ? tag : tag + std::to_string(c.config_index));
    for (char& ch : e.image_id) ch = ch == ':' ? '-' : ch;
    e.base_id = base.image.id;
    e.path = "images/adv/" + e.image_id + ".jpg";
    e.ground_truth = base.image.label;
    e.backend_id = backend->id();
    e.origin = Origin::Attack;
    e.attack = to_string(c.config.family);
    e.attack_mode = to_string(c.config.mode);
    e.config_digest = config_digest(configs[c.config_index].to_json());
    e.target = c.target;
    e.target_confidence = c.config.target_confidence;
    e.original_top5 = base.top5;
    e.post_save_top5 = c.post_save_top5;
    e.sha256 = sha256_hex(c.jpeg);
    write_file(o.out_dir / e.path, c.jpeg);
    manifest.entries.push_back(std::move(e));
  }

  json skipped = json::array();
  if (o.import_dir) {
    ImportResult imported = import_external(*o.import_dir, *backend, o.workers);
    for (auto& im : imported.accepted) {
      ManifestEntry e = std::move(im.entry);
      if (const ManifestEntry* base = manifest.find(e.base_id); base && !base->is_adversarial()) {
        e.original_top5 = base->original_top5;
        e.ground_truth = base->ground_truth;
      }
      e.path = "images/imported/" + file_safe(e.path);
      write_file(o.out_dir / e.path, im.bytes);
      manifest.entries.push_back(std::move(e));
    }
    for (const auto& s : imported.skipped) {
      skipped.push_back({{"file", s.file}, {"reason", to_string(s.reason)}, {"message", s.message}});
    }
  }

  split_manifest(manifest, o.ratios, o.seed);
  manifest.save(manifest_path);
  write_stamp(manifest_path, digest);

  std::map<std::string, std::map<std::string, int>> split_counts;
  for (const auto& e : manifest.entries) ++split_counts[e.split][e.family_tag()];
  const json per_split = split_counts;
  json attacks = json::object();
  for (const auto& [tag, fc] : family_counts) {
    attacks[tag] = {{"attempted", fc.attempted},
                    {"attack_success", fc.success},
                    {"kept_after_persistence", fc.kept},
                    {"failed", fc.failed},
                    {"kept_rate", fc.attempted ? static_cast<double>(fc.kept) / fc.attempted : 0.0}};
  }
  const json summary{{"provenance", manifest.provenance},
                     {"normal_images", selected.size()},
                     {"entries", manifest.entries.size()},
                     {"attacks", attacks},
                     {"splits", per_split},
                     {"failures", failures},
                     {"import_skipped", skipped}};
  if (o.report_dir) save_json_report(*o.report_dir / "dataset.json", summary);
  if (report) *report = summary;
  return {false, "manifest: " + std::to_string(manifest.entries.size()) + " entries from " +
                     std::to_string(selected.size()) + " normal images"};
}

// ---------------------------------------------------------------------------

FeatureTable build_feature_table(const DatasetManifest& manifest, const std::vector<LabelTrace>& traces,
                                 FeatureKind kind, const OperationSubset& subset) {
  if (traces.size() != manifest.entries.size()) {
    throw Error(ErrorKind::FeatureMismatch, "trace count differs from manifest entries");
  }
  FeatureTable table;
  table.kind = kind;
  table.subset_id = subset.id;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    if (traces[i].image_id != e.image_id) throw Error(ErrorKind::FeatureMismatch, "trace order differs from manifest");
    FeatureVector f = extract_feature(traces[i], subset, kind);
    table.rows.push_back({e.image_id, e.split, e.is_adversarial(), e.family_tag(), f.backend_id, std::move(f.values)});
  }
  return table;
}

StageStatus extract_features_stage(const FeatureOptions& o) {
  const OperationSubset subset = canonical_subset(o.subset);
  const std::string manifest_digest = file_digest(o.manifest);
  const auto backend = open_backend(o.backend, o.model, o.workers);
  const json key{{"stage", "extract-features"},
                 {"manifest", manifest_digest},
                 {"backend", backend->id()},
                 {"feature", to_string(o.kind)},
                 {"subset", o.subset}};
  const std::string digest = config_digest(key);
  if (!o.force && stage_current(o.out, digest)) return {true, "feature file is up to date"};

  const auto traces = ensure_traces(o.manifest, *backend, o.workers, o.force);
  const DatasetManifest manifest = DatasetManifest::load(o.manifest);
  FeatureTable table = build_feature_table(manifest, traces, o.kind, subset);
  table.provenance = provenance(key, manifest.provenance.value("seeds", json::object()));
  save_feature_table(o.out, table);
  write_stamp(o.out, digest);
  return {false, "features: " + std::to_string(table.rows.size()) + " rows of dimension " +
                     std::to_string(table.dimension())};
}

StageStatus train_detector_stage(const DetectorOptions& o) {
  const json key{{"stage", "train-detector"},
                 {"features", file_digest(o.features)},
                 {"detector", to_string(o.kind)},
                 {"config", o.config.to_json()},
                 {"select_on_dev", o.select_on_dev},
                 {"seed", o.seed}};
  const std::string digest = config_digest(key);
  if (!o.force && stage_current(o.model_out, digest)) return {true, "detector is up to date"};

  const FeatureTable table = load_feature_table(o.features);
  json selection = json::array();
  const DetectorModel model = o.select_on_dev ? select_on_dev(o.kind, table, o.config, o.seed, &selection)
                                              : train_detector(o.kind, table, o.config, o.seed);
  const json meta{{"provenance", provenance(key, {{"detector", o.seed}})},
                  {"feature_provenance", table.provenance},
                  {"selection", selection}};
  model.save(o.model_out, meta);
  write_stamp(o.model_out, digest);
  return {false, "detector " + to_string(o.kind) + " on " + to_string(table.kind) + "/" + table.subset_id + " (" +
                     std::to_string(table.split_rows("train").size()) + " train rows)"};
}

fs::path detection_report_path(const fs::path& report_dir, DetectorKind kind, FeatureKind feature,
                               const std::string& subset) {
  return report_dir / "detection" / (to_string(kind) + "_" + to_string(feature) + "_" + file_safe(subset) + ".json");
}

StageStatus evaluate_detector_stage(const EvaluateOptions& o, EvalReport* out) {
  json model_meta;
  const DetectorModel model = DetectorModel::load(o.model, &model_meta);
  const fs::path path = detection_report_path(o.report_dir, model.kind(), model.feature_kind(), model.subset_id());
  const json key{{"stage", "evaluate-detector"},
                 {"model", file_digest(o.model)},
                 {"features", file_digest(o.features)},
                 {"split", o.split},
                 {"balance_seed", o.balance_seed ? json(*o.balance_seed) : json()}};
  const std::string digest = config_digest(key);
  if (!o.force && stage_current(path, digest)) {
    if (out) *out = EvalReport::from_json(json::parse(read_text(path)).at("report"));
    return {true, "evaluation is up to date"};
  }

  const FeatureTable table = load_feature_table(o.features);
  std::vector<FeatureRow> rows = o.split == "all" ? table.rows : table.split_rows(o.split);
  if (o.balance_seed) rows = balance_rows(rows, *o.balance_seed);
  const EvalReport r = evaluate(model, rows, o.split);
  const json j{{"provenance", provenance(key, {{"balance", o.balance_seed ? json(*o.balance_seed) : json()}})},
               {"detector", to_string(model.kind())},
               {"feature", to_string(model.feature_kind())},
               {"subset", model.subset_id()},
               {"balanced", o.balance_seed.has_value()},
               {"report", r.to_json()}};
  save_json_report(path, j);
  write_text(fs::path(path).replace_extension(".txt"), r.to_text());
  write_stamp(path, digest);
  if (out) *out = r;
  return {false, to_string(model.kind()) + " " + to_string(model.feature_kind()) + "/" + model.subset_id() + " on " +
                     o.split + ": accuracy " + format_fixed(r.accuracy, 4) + " over " + std::to_string(r.total()) +
                     " rows"};
}

}  // namespace advdetect
