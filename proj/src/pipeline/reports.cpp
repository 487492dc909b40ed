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
#include <set>
#include <sstream>

#include "advdetect/parallel.hpp"
#include "advdetect/pipeline.hpp"
#include "advdetect/provenance.hpp"

namespace advdetect {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& default_effect_ops() {
  static const std::vector<std::string> ops = {
      "jpeg:100",   "jpeg:80",    "jpeg:60",    "jpeg:40", "jpeg:20",  "scale:0.75", "scale:0.85",
      "scale:0.95", "scale:1.05", "scale:1.15", "scale:1.25", "blur:3", "rotate:2",   "rotate:5"};
  return ops;
}

json EffectsTable::to_json() const {
  return {{"operations", operations}, {"row_types", row_types}, {"totals", totals}, {"counts", counts}};
}

EffectsTable EffectsTable::from_json(const json& j) {
  EffectsTable t;
  t.operations = j.at("operations").get<std::vector<std::string>>();
  t.row_types = j.at("row_types").get<std::vector<std::string>>();
  t.totals = j.at("totals").get<std::vector<int>>();
  t.counts = j.at("counts").get<std::vector<std::vector<int>>>();
  return t;
}

TextTable EffectsTable::table() const {
  TextTable t;
  t.header = {"images", "n", "Original"};
  t.header.insert(t.header.end(), operations.begin(), operations.end());
  for (std::size_t r = 0; r < row_types.size(); ++r) {
    std::vector<std::string> row = {row_types[r], std::to_string(totals[r])};
    for (int c : counts[r]) row.push_back(std::to_string(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

EffectsTable measure_effects(const DatasetManifest& manifest, const fs::path& root, const Classifier& backend,
                             const std::vector<OperationSpec>& ops, int workers) {
  const std::size_t n = manifest.entries.size();
  std::vector<std::vector<char>> missed(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    const Image img = load_image(root / e.path);
    auto& m = missed[i];
    m.push_back(!top5_correct(backend.classify_top5(img), e.ground_truth));
    for (const auto& op : ops) m.push_back(!top5_correct(backend.classify_top5(apply(op, img)), e.ground_truth));
  });

  EffectsTable t;
  for (const auto& op : ops) t.operations.push_back(op.name());
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string tag = manifest.entries[i].family_tag();
    auto [it, inserted] = row_of.try_emplace(tag, t.row_types.size());
    if (inserted) {
      t.row_types.push_back(tag);
      t.totals.push_back(0);
      t.counts.emplace_back(ops.size() + 1, 0);
    }
    ++t.totals[it->second];
    for (std::size_t c = 0; c <= ops.size(); ++c) t.counts[it->second][c] += missed[i][c];
  }
  // Normal images first, as in the reported layout.
  if (auto it = row_of.find("normal"); it != row_of.end() && it->second != 0) {
    const std::size_t r = it->second;
    std::rotate(t.row_types.begin(), t.row_types.begin() + static_cast<std::ptrdiff_t>(r),
                t.row_types.begin() + static_cast<std::ptrdiff_t>(r) + 1);
    std::rotate(t.totals.begin(), t.totals.begin() + static_cast<std::ptrdiff_t>(r),
                t.totals.begin() + static_cast<std::ptrdiff_t>(r) + 1);
    std::rotate(t.counts.begin(), t.counts.begin() + static_cast<std::ptrdiff_t>(r),
                t.counts.begin() + static_cast<std::ptrdiff_t>(r) + 1);
  }
  return t;
}

StageStatus measure_effects_stage(const EffectsOptions& o, EffectsTable* out) {
  std::vector<OperationSpec> ops;
  std::vector<std::string> names;
  for (const auto& text : o.ops) {
    ops.push_back(parse_operation(text));
    names.push_back(ops.back().name());
  }
  const auto backend = open_backend(o.backend, o.model, o.workers);
  const json key{{"stage", "measure-effects"},
                 {"manifest", file_digest(o.manifest)},
                 {"backend", backend->id()},
                 {"operations", names}};
  const std::string digest = config_digest(key);
  const fs::path path = o.report_dir / "effects.json";
  if (!o.force && stage_current(path, digest)) {
    if (out) *out = EffectsTable::from_json(json::parse(read_text(path)));
    return {true, "effects report is up to date"};
  }

  const DatasetManifest manifest = DatasetManifest::load(o.manifest);
  const EffectsTable t = measure_effects(manifest, o.manifest.parent_path(), *backend, ops, o.workers);
  json j = t.to_json();
  j["provenance"] = provenance(key, manifest.provenance.value("seeds", json::object()));
  write_text(path, j.dump(2) + "\n");
  const TextTable tt = t.table();
  write_text(o.report_dir / "effects.txt", tt.to_text());
  write_text(o.report_dir / "effects.csv", tt.to_csv());
  write_stamp(path, digest);
  if (out) *out = t;
  return {false, "effects: " + std::to_string(manifest.entries.size()) + " images x " +
                     std::to_string(ops.size() + 1) + " columns"};
}

// ---------------------------------------------------------------------------

double CorrectionRow::normal_rate() const {
  return normal_total ? 100.0 * normal_corrected / normal_total : 0.0;
}

double CorrectionRow::adversarial_rate() const {
  return adversarial_total ? 100.0 * adversarial_corrected / adversarial_total : 0.0;
}

const CorrectionRow& CorrectionSummary::row(const std::string& subset_id) const {
  for (const auto& r : rows) {
    if (r.subset_id == subset_id) return r;
  }
  throw Error(ErrorKind::InvalidArgument, "no correction row for subset '" + subset_id + "'");
}

json CorrectionSummary::to_json() const {
  json out = json::array();
  for (const auto& r : rows) {
    json fam = json::object();
    for (const auto& [name, tc] : r.per_family) fam[name] = {{"total", tc.first}, {"corrected", tc.second}};
    out.push_back({{"subset", r.subset_id},
                   {"normal_total", r.normal_total},
                   {"normal_corrected", r.normal_corrected},
                   {"normal_rate", r.normal_rate()},
                   {"adversarial_total", r.adversarial_total},
                   {"adversarial_corrected", r.adversarial_corrected},
                   {"adversarial_rate", r.adversarial_rate()},
                   {"per_family", fam}});
  }
  return {{"split", split}, {"match", to_string(match)}, {"rows", out}};
}

CorrectionSummary CorrectionSummary::from_json(const json& j) {
  CorrectionSummary s;
  s.split = j.at("split").get<std::string>();
  s.match = parse_correction_match(j.at("match").get<std::string>());
  for (const auto& r : j.at("rows")) {
    CorrectionRow row;
    row.subset_id = r.at("subset").get<std::string>();
    row.normal_total = r.at("normal_total").get<int>();
    row.normal_corrected = r.at("normal_corrected").get<int>();
    row.adversarial_total = r.at("adversarial_total").get<int>();
    row.adversarial_corrected = r.at("adversarial_corrected").get<int>();
    for (const auto& [name, tc] : r.at("per_family").items()) {
      row.per_family[name] = {tc.at("total").get<int>(), tc.at("corrected").get<int>()};
    }
    s.rows.push_back(std::move(row));
  }
  return s;
}

TextTable CorrectionSummary::table() const {
  TextTable t;
  t.header = {"operations", "normal %", "adversarial %", "normal n", "adversarial n"};
  for (const auto& r : rows) {
    t.rows.push_back({r.subset_id, format_fixed(r.normal_rate(), 2), format_fixed(r.adversarial_rate(), 2),
                      std::to_string(r.normal_total), std::to_string(r.adversarial_total)});
  }
  return t;
}

CorrectionSummary summarize_correction(const DatasetManifest& manifest, const std::vector<LabelTrace>& traces,
                                       const std::vector<std::string>& subsets, const std::string& split,
                                       CorrectionMatch match) {
  if (traces.size() != manifest.entries.size()) {
    throw Error(ErrorKind::FeatureMismatch, "trace count differs from manifest entries");
  }
  CorrectionSummary s;
  s.split = split;
  s.match = match;
  for (const auto& id : subsets) {
    const OperationSubset subset = canonical_subset(id);
    CorrectionRow row;
    row.subset_id = id;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const ManifestEntry& e = manifest.entries[i];
      if (split != "all" && e.split != split) continue;
      const bool ok = is_corrected(correct_labels(traces[i], subset), e.original_top5, match);
      if (e.is_adversarial()) {
        ++row.adversarial_total;
        row.adversarial_corrected += ok;
      } else {
        ++row.normal_total;
        row.normal_corrected += ok;
      }
      auto& fam = row.per_family[e.family_tag()];
      ++fam.first;
      fam.second += ok;
    }
    s.rows.push_back(std::move(row));
  }
  return s;
}

StageStatus correct_stage(const CorrectionOptions& o, CorrectionSummary* out) {
  const auto backend = open_backend(o.backend, o.model, o.workers);
  const json key{{"stage", "correct"},
                 {"manifest", file_digest(o.manifest)},
                 {"backend", backend->id()},
                 {"subsets", o.subsets},
                 {"split", o.split},
                 {"match", to_string(o.match)}};
  const std::string digest = config_digest(key);
  const fs::path path = o.report_dir / "correction.json";
  if (!o.force && stage_current(path, digest)) {
    if (out) *out = CorrectionSummary::from_json(json::parse(read_text(path)));
    return {true, "correction report is up to date"};
  }

  const auto traces = ensure_traces(o.manifest, *backend, o.workers, o.force);
  const DatasetManifest manifest = DatasetManifest::load(o.manifest);
  const CorrectionSummary s = summarize_correction(manifest, traces, o.subsets, o.split, o.match);
  json j = s.to_json();
  j["provenance"] = provenance(key, manifest.provenance.value("seeds", json::object()));
  write_text(path, j.dump(2) + "\n");
  const TextTable tt = s.table();
  write_text(o.report_dir / "correction.txt", tt.to_text());
  write_text(o.report_dir / "correction.csv", tt.to_csv());
  write_stamp(path, digest);
  if (out) *out = s;
  std::string summary = "correction on " + o.split + ":";
  for (const auto& r : s.rows) {
    summary += " " + r.subset_id + " " + format_fixed(r.adversarial_rate(), 2) + "%/" +
               format_fixed(r.normal_rate(), 2) + "%";
  }
  return {false, summary};
}

// ---------------------------------------------------------------------------

StageStatus report_stage(const fs::path& report_dir) {
  if (!fs::is_directory(report_dir)) throw Error(ErrorKind::MissingInput, "no report directory " + report_dir.string());
  std::map<std::string, std::string> versions;
  auto read_json = [&](const fs::path& p) {
    json j = json::parse(read_text(p));
    const json prov = j.contains("provenance") ? j["provenance"] : json::object();
    versions[fs::relative(p, report_dir).generic_string()] = prov.value("tool_version", "unknown");
    return j;
  };

  std::optional<json> desk;
  std::optional<json> dataset;
  std::optional<EffectsTable> effects;
  std::optional<CorrectionSummary> correction;
  std::map<std::tuple<std::string, std::string, std::string>, json> detection;
  if (fs::exists(report_dir / "desk_model.json")) desk = read_json(report_dir / "desk_model.json");
  if (fs::exists(report_dir / "dataset.json")) dataset = read_json(report_dir / "dataset.json");
  if (fs::exists(report_dir / "effects.json")) effects = EffectsTable::from_json(read_json(report_dir / "effects.json"));
  if (fs::exists(report_dir / "correction.json")) {
    correction = CorrectionSummary::from_json(read_json(report_dir / "correction.json"));
  }
  if (fs::is_directory(report_dir / "detection")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(report_dir / "detection")) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      json j = read_json(f);
      detection[{j.at("detector").get<std::string>(), j.at("subset").get<std::string>(),
                 j.at("feature").get<std::string>()}] = j;
    }
  }
  std::set<std::string> distinct;
  for (const auto& [file, v] : versions) distinct.insert(v);
  if (distinct.size() > 1) {
    std::string detail;
    for (const auto& [file, v] : versions) detail += " " + file + "=" + v;
    throw Error(ErrorKind::VersionMismatch, "report inputs come from different tool versions:" + detail);
  }
  if (versions.empty()) throw Error(ErrorKind::MissingInput, "no stage results in " + report_dir.string());

  std::ostringstream os;
  os << "advdetect report (tool " << *distinct.begin() << ")\n\n";
  if (desk) {
    const json& r = desk->at("train_report");
    os << "Desk model\n  test top-1 " << format_fixed(r.value("validation_top1", 0.0), 4) << ", top-5 "
       << format_fixed(r.value("validation_top5", 0.0), 4) << "\n\n";
  }
  if (dataset) {
    TextTable t;
    t.header = {"attack", "attempted", "attack success", "kept after JPEG-100", "kept rate"};
    for (const auto& [tag, a] : dataset->at("attacks").items()) {
      t.rows.push_back({tag, std::to_string(a.at("attempted").get<int>()),
                        std::to_string(a.at("attack_success").get<int>()),
                        std::to_string(a.at("kept_after_persistence").get<int>()),
                        format_fixed(a.at("kept_rate").get<double>(), 4)});
    }
    os << "Adversarial generation\n" << t.to_text() << '\n';
    TextTable s;
    s.header = {"split"};
    std::set<std::string> tags;
    for (const auto& [split, fam] : dataset->at("splits").items()) {
      for (const auto& [tag, n] : fam.items()) tags.insert(tag);
    }
    s.header.insert(s.header.end(), tags.begin(), tags.end());
    for (const auto& split : kSplitNames) {
      if (!dataset->at("splits").contains(split)) continue;
      std::vector<std::string> row = {split};
      for (const auto& tag : tags) row.push_back(std::to_string(dataset->at("splits")[split].value(tag, 0)));
      s.rows.push_back(std::move(row));
    }
    os << "Dataset splits\n" << s.to_text() << '\n';
  }
  if (effects) {
    const TextTable t = effects->table();
    os << "Top-5 misclassified images before and after each operation\n" << t.to_text() << '\n';
    write_text(report_dir / "effects.csv", t.to_csv());
  }
  if (!detection.empty()) {
    std::vector<std::string> subsets;
    for (const auto& id : canonical_subset_ids()) subsets.push_back(id);
    for (const auto& [k, j] : detection) {
      if (std::find(subsets.begin(), subsets.end(), std::get<1>(k)) == subsets.end()) subsets.push_back(std::get<1>(k));
    }
    TextTable t;
    t.header = {"detector"};
    std::vector<std::pair<std::string, std::string>> columns;
    for (const auto& s : subsets) {
      for (const std::string f : {"count", "diff"}) {
        bool present = false;
        for (const auto& [k, j] : detection) present |= std::get<1>(k) == s && std::get<2>(k) == f;
        if (!present) continue;
        columns.emplace_back(s, f);
        t.header.push_back(s + " " + f);
      }
    }
    for (const std::string d : {"svm", "forest", "lda", "mlp"}) {
      std::vector<std::string> row = {d};
      bool any = false;
      for (const auto& [s, f] : columns) {
        const auto it = detection.find({d, s, f});
        if (it == detection.end()) {
          row.push_back("-");
        } else {
          any = true;
          row.push_back(format_fixed(100.0 * it->second.at("report").at("accuracy").get<double>(), 2));
        }
      }
      if (any) t.rows.push_back(std::move(row));
    }
    os << "Detection accuracy (%) on the evaluation split\n" << t.to_text() << '\n';
    write_text(report_dir / "detection.csv", t.to_csv());
  }
  if (correction) {
    const TextTable t = correction->table();
    os << "Corrected top-5 classifications (%), split " << correction->split << ", match "
       << to_string(correction->match) << '\n'
       << t.to_text() << '\n';
    write_text(report_dir / "correction.csv", t.to_csv());
  }
  write_text(report_dir / "report.txt", os.str());
  return {false, os.str()};
}

}  // namespace advdetect
