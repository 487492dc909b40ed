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

#include "advdetect/dataset.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "advdetect/parallel.hpp"
#include "advdetect/provenance.hpp"

namespace advdetect {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::Normal: return "normal";
    case Origin::Attack: return "attack";
    case Origin::Imported: return "imported";
  }
  return "unknown";
}

Origin parse_origin(const std::string& text) {
  for (auto o : {Origin::Normal, Origin::Attack, Origin::Imported}) {
    if (to_string(o) == text) return o;
  }
  throw Error(ErrorKind::FormatError, "unknown origin '" + text + "'");
}

std::string ManifestEntry::family_tag() const {
  if (!is_adversarial()) return "normal";
  return attack_mode == to_string(AttackMode::Targeted) ? attack + ":t" : attack;
}

SuccessCriterion ManifestEntry::criterion() const {
  SuccessCriterion c;
  c.mode = attack_mode.empty() ? AttackMode::NonTargeted : parse_attack_mode(attack_mode);
  c.original_top1 = original_top5.top1();
  c.target = target;
  c.target_confidence = target_confidence;
  return c;
}

json ManifestEntry::to_json() const {
  json j{{"image_id", image_id},
         {"base_id", base_id},
         {"path", path},
         {"ground_truth", ground_truth},
         {"backend_id", backend_id},
         {"origin", advdetect::to_string(origin)},
         {"original_top5", advdetect::to_json(original_top5)},
         {"post_save_top5", advdetect::to_json(post_save_top5)},
         {"split", split},
         {"sha256", sha256}};
  if (is_adversarial()) {
    j["attack"] = attack;
    j["attack_mode"] = attack_mode;
    j["config_digest"] = config_digest;
    j["target"] = target;
    j["target_confidence"] = target_confidence;
  }
  return j;
}

ManifestEntry ManifestEntry::from_json(const json& j) {
  ManifestEntry e;
  try {
    e.image_id = j.at("image_id").get<std::string>();
    e.base_id = j.at("base_id").get<std::string>();
    e.path = j.at("path").get<std::string>();
    e.ground_truth = j.at("ground_truth").get<Label>();
    e.backend_id = j.at("backend_id").get<std::string>();
    e.origin = parse_origin(j.at("origin").get<std::string>());
    e.original_top5 = top5_from_json(j.at("original_top5"));
    e.post_save_top5 = top5_from_json(j.at("post_save_top5"));
    e.split = j.value("split", "");
    e.sha256 = j.at("sha256").get<std::string>();
    if (e.is_adversarial()) {
      e.attack = j.at("attack").get<std::string>();
      e.attack_mode = j.at("attack_mode").get<std::string>();
      e.config_digest = j.value("config_digest", "");
      e.target = j.value("target", Label{-1});
      e.target_confidence = j.value("target_confidence", 0.99);
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::FormatError, std::string("manifest entry: ") + ex.what());
  }
  return e;
}

std::string DatasetManifest::to_text() const {
  std::ostringstream os;
  const json header{{"format", "advdetect-manifest"},
                    {"version", kFormatVersion},
                    {"codec", codec},
                    {"suite_version", suite_version},
                    {"backend_id", backend_id},
                    {"num_labels", num_labels},
                    {"entries", entries.size()},
                    {"provenance", provenance}};
  os << header.dump() << '\n';
  for (const auto& e : entries) os << e.to_json().dump() << '\n';
  return os.str();
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::FormatError, "empty manifest");
  DatasetManifest m;
  std::size_t expected = 0;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "advdetect-manifest") throw Error(ErrorKind::FormatError, "not a manifest");
    if (header.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorKind::VersionMismatch, "unsupported manifest version");
    }
    m.codec = header.at("codec").get<std::string>();
    m.suite_version = header.at("suite_version").get<int>();
    m.backend_id = header.at("backend_id").get<std::string>();
    m.num_labels = header.at("num_labels").get<int>();
    m.provenance = header.value("provenance", json::object());
    expected = header.at("entries").get<std::size_t>();
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::FormatError, std::string("manifest header: ") + ex.what());
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::FormatError, "manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
    m.entries.push_back(ManifestEntry::from_json(j));
  }
  if (m.entries.size() != expected) throw Error(ErrorKind::FormatError, "manifest is truncated");
  return m;
}

void DatasetManifest::save(const fs::path& path) const {
  const std::string text = to_text();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
  const Bytes bytes = read_file(path);
  return parse(std::string(bytes.begin(), bytes.end()));
}

const ManifestEntry* DatasetManifest::find(const std::string& image_id) const {
  for (const auto& e : entries) {
    if (e.image_id == image_id) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

std::vector<SelectedImage> select_normal(const LabeledImages& pool, const Classifier& backend, int count,
                                         std::uint64_t seed, int workers) {
  if (count < 0) throw Error(ErrorKind::InvalidArgument, "negative selection count");
  if (count == 0) return {};
  std::vector<Top5> top5(pool.size());
  parallel_for(pool.size(), workers, [&](std::size_t i) { top5[i] = backend.classify_top5(pool[i].image); });
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (top5_correct(top5[i], pool[i].label)) correct.push_back(i);
  }
  if (correct.size() < static_cast<std::size_t>(count)) {
    throw Error(ErrorKind::InsufficientCorrectImages, "only " + std::to_string(correct.size()) + " of " +
                                                          std::to_string(pool.size()) +
                                                          " images are top-5 correct; need " + std::to_string(count));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(correct.begin(), correct.end(), rng);
  correct.resize(static_cast<std::size_t>(count));
  std::sort(correct.begin(), correct.end());
  std::vector<SelectedImage> out;
  out.reserve(correct.size());
  for (auto i : correct) out.push_back({pool[i], top5[i]});
  return out;
}

bool keep_adversarial(const SuccessCriterion& criterion, const Top5& post_save) {
  return criterion.holds(post_save) && !post_save.contains(criterion.original_top1);
}

std::uint64_t attack_seed(std::uint64_t seed, std::size_t base_index, std::size_t config_index) {
  // splitmix64 over the combined position.
  std::uint64_t z = seed ^ (static_cast<std::uint64_t>(base_index) * 0x9e3779b97f4a7c15ULL) ^
                    (static_cast<std::uint64_t>(config_index) * 0xc2b2ae3d27d4eb4fULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<AdversarialCandidate> generate_adversarial(const std::vector<SelectedImage>& selected,
                                                       const Classifier& backend,
                                                       const std::vector<AttackConfig>& configs, std::uint64_t seed,
                                                       int workers) {
  std::vector<AdversarialCandidate> out(selected.size() * configs.size());
  parallel_for(out.size(), workers, [&](std::size_t k) {
    AdversarialCandidate& c = out[k];
    c.base_index = k / configs.size();
    c.config_index = k % configs.size();
    c.config = configs[c.config_index];
    c.config.seed = attack_seed(seed, c.base_index, c.config_index);
    try {
      const Image& img = selected[c.base_index].image.image;
      const AttackOutcome outcome = run_attack(c.config, backend, img);
      c.attack_success = outcome.success;
      c.pre_save_top5 = outcome.final_top5;
      c.target = outcome.target;
      if (!outcome.success) return;
      c.jpeg = encode_jpeg(quantize(*outcome.adversarial), 100);
      c.post_save_top5 = backend.classify_top5(dequantize<double>(decode_jpeg(c.jpeg)));
      const auto criterion = criterion_for(c.config, outcome.original_top5, backend.num_labels());
      c.kept = keep_adversarial(criterion, c.post_save_top5);
      if (!c.kept) c.jpeg.clear();
    } catch (const Error& e) {
      c.failure = e.what();
      c.kept = false;
      c.jpeg.clear();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

std::array<std::size_t, 3> split_capacities(std::size_t groups, const std::array<double, 3>& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw Error(ErrorKind::InvalidArgument, "split ratios must be >= 0");
    total += r;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidArgument, "split ratios sum to zero");
  std::array<std::size_t, 3> cap{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = static_cast<double>(groups) * ratios[s] / total;
    cap[s] = static_cast<std::size_t>(std::floor(exact));
    remainder[s] = exact - static_cast<double>(cap[s]);
    assigned += cap[s];
  }
  while (assigned < groups) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (remainder[s] > remainder[best]) best = s;
    }
    ++cap[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  for (int s = 0; s < 3; ++s) {
    if (ratios[s] > 0.0 && cap[s] == 0) {
      throw Error(ErrorKind::RatioInfeasible, std::to_string(groups) + " base images cannot fill the " +
                                                  kSplitNames[s] + " split");
    }
  }
  return cap;
}

void split_manifest(DatasetManifest& manifest, const std::array<double, 3>& ratios, std::uint64_t seed) {
  std::vector<std::string> bases;
  std::map<std::string, std::set<std::string>> signature;
  for (const auto& e : manifest.entries) {
    auto [it, inserted] = signature.try_emplace(e.base_id);
    if (inserted) bases.push_back(e.base_id);
    if (e.is_adversarial()) it->second.insert(e.family_tag());
  }
  const auto cap = split_capacities(bases.size(), ratios);

  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& b : bases) {
    std::string key;
    for (const auto& f : signature[b]) key += f + ";";
    strata[key].push_back(b);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> order;
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    order.insert(order.end(), members.begin(), members.end());
  }

  const double total = ratios[0] + ratios[1] + ratios[2];
  std::array<std::size_t, 3> count{};
  std::map<std::string, int> assignment;
  for (std::size_t k = 0; k < order.size(); ++k) {
    int best = -1;
    double best_deficit = 0.0;
    for (int s = 0; s < 3; ++s) {
      if (count[s] >= cap[s]) continue;
      const double deficit = ratios[s] / total * static_cast<double>(k + 1) - static_cast<double>(count[s]);
      if (best < 0 || deficit > best_deficit) {
        best = s;
        best_deficit = deficit;
      }
    }
    ++count[best];
    assignment[order[k]] = best;
  }
  for (auto& e : manifest.entries) e.split = kSplitNames[assignment.at(e.base_id)];
}

// ---------------------------------------------------------------------------

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

Image decode_bytes(const fs::path& name, std::span<const std::uint8_t> bytes) {
  std::string ext = name.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return dequantize<double>(ext == ".png" ? decode_png(bytes) : decode_jpeg(bytes));
}

}  // namespace

ImportResult import_external(const fs::path& directory, const Classifier& backend, int workers) {
  if (!fs::is_directory(directory)) throw Error(ErrorKind::MissingInput, "not a directory: " + directory.string());
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  ImportResult result;
  if (files.empty()) return result;

  const fs::path sidecar = directory / kImportSidecar;
  if (!fs::exists(sidecar)) {
    throw Error(ErrorKind::MetadataMissing, "no " + std::string(kImportSidecar) + " in " + directory.string());
  }
  std::map<std::string, json> meta;
  {
    const Bytes bytes = read_file(sidecar);
    std::istringstream is(std::string(bytes.begin(), bytes.end()));
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      try {
        json j = json::parse(line);
        std::string file = j.at("file").get<std::string>();
        meta[std::move(file)] = std::move(j);
      } catch (const json::exception& ex) {
        throw Error(ErrorKind::FormatError, std::string("import sidecar: ") + ex.what());
      }
    }
  }
  for (const auto& [file, j] : meta) {
    if (!std::binary_search(files.begin(), files.end(), file)) {
      result.skipped.push_back({file, ErrorKind::MissingInput, "listed in sidecar but not present"});
    }
  }

  struct Attempt {
    std::optional<ImportedImage> accepted;
    std::optional<ImportSkip> skipped;
  };
  std::vector<Attempt> attempts(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    const std::string& file = files[i];
    const auto it = meta.find(file);
    if (it == meta.end()) {
      attempts[i].skipped = ImportSkip{file, ErrorKind::MetadataMissing, "no sidecar entry"};
      return;
    }
    try {
      const json& j = it->second;
      ManifestEntry e;
      e.base_id = j.at("original_id").get<std::string>();
      e.attack = j.at("attack").get<std::string>();
      e.attack_mode = to_string(parse_attack_mode(j.value("mode", to_string(AttackMode::NonTargeted))));
      const Label original = j.at("original_label").get<Label>();
      e.ground_truth = j.value("ground_truth", original);
      e.target = j.value("target", Label{-1});
      e.target_confidence = j.value("target_confidence", 0.99);
      e.original_top5.labels = {original, -1, -1, -1, -1};
      e.origin = Origin::Imported;
      e.backend_id = backend.id();
      e.image_id = "imp_" + fs::path(file).stem().string();
      if (e.attack_mode == to_string(AttackMode::Targeted) && e.target < 0) {
        throw Error(ErrorKind::MetadataMissing, "targeted entry without a target label");
      }
      Bytes bytes = read_file(directory / file);
      const Image img = decode_bytes(file, bytes);
      validate(img);
      e.post_save_top5 = backend.classify_top5(img);
      if (!keep_adversarial(e.criterion(), e.post_save_top5)) {
        attempts[i].skipped = ImportSkip{file, ErrorKind::VerificationFailed, "criterion does not hold"};
        return;
      }
      e.sha256 = sha256_hex(bytes);
      e.path = file;
      attempts[i].accepted = ImportedImage{std::move(e), std::move(bytes)};
    } catch (const json::exception& ex) {
      attempts[i].skipped = ImportSkip{file, ErrorKind::MetadataMissing, ex.what()};
    } catch (const Error& ex) {
      attempts[i].skipped = ImportSkip{file, ex.kind(), ex.what()};
    }
  });
  for (auto& a : attempts) {
    if (a.accepted) result.accepted.push_back(std::move(*a.accepted));
    if (a.skipped) result.skipped.push_back(std::move(*a.skipped));
  }
  return result;
}

std::vector<std::string> verify_manifest(const DatasetManifest& manifest, const fs::path& root,
                                         const Classifier& backend, int workers) {
  std::vector<std::string> problems(manifest.entries.size());
  parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    try {
      const Bytes bytes = read_file(root / e.path);
      if (sha256_hex(bytes) != e.sha256) {
        problems[i] = e.image_id + ": content digest mismatch";
        return;
      }
      const Top5 now = backend.classify_top5(decode_bytes(e.path, bytes));
      if (e.is_adversarial()) {
        if (now != e.post_save_top5) {
          problems[i] = e.image_id + ": re-classification differs from the recorded top-5";
        } else if (!keep_adversarial(e.criterion(), now)) {
          problems[i] = e.image_id + ": adversarial criterion no longer holds";
        }
      } else if (!top5_correct(now, e.ground_truth)) {
        problems[i] = e.image_id + ": normal image is no longer top-5 correct";
      }
    } catch (const Error& ex) {
      problems[i] = e.image_id + ": " + ex.what();
    }
  });
  std::erase_if(problems, [](const std::string& p) { return p.empty(); });
  return problems;
}

}  // namespace advdetect
