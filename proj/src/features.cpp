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

#include "advdetect/features.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include "advdetect/codec.hpp"

namespace advdetect {

using nlohmann::json;

namespace {

constexpr char kPositionNames[kTopK] = {'a', 'b', 'c', 'd', 'e'};

void check_subset(const LabelTrace& t, const OperationSubset& subset) {
  if (subset.indices.empty()) throw Error(ErrorKind::InvalidArgument, "operation subset is empty");
  for (auto i : subset.indices) {
    if (i >= t.post.size()) {
      throw Error(ErrorKind::FeatureMismatch, "subset '" + subset.id + "' exceeds trace length " +
                                                  std::to_string(t.post.size()));
    }
  }
}

}  // namespace

json LabelTrace::to_json() const {
  json posts = json::array();
  for (const auto& p : post) posts.push_back(advdetect::to_json(p));
  return {{"image_id", image_id}, {"backend_id", backend_id}, {"base", advdetect::to_json(base)}, {"post", posts}};
}

LabelTrace LabelTrace::from_json(const json& j) {
  LabelTrace t;
  t.image_id = j.at("image_id").get<std::string>();
  t.backend_id = j.at("backend_id").get<std::string>();
  t.base = top5_from_json(j.at("base"));
  for (const auto& p : j.at("post")) t.post.push_back(top5_from_json(p));
  return t;
}

const std::vector<std::string>& canonical_subset_ids() {
  static const std::vector<std::string> ids = {"jpeg", "blur", "rotation", "scaling", "jpeg+scaling", "all"};
  return ids;
}

OperationSubset canonical_subset(const std::string& id) {
  const auto& suite = canonical_suite();
  auto pick = [&](std::initializer_list<OpFamily> families) {
    OperationSubset s{id, {}};
    for (std::size_t i = 0; i < suite.size(); ++i) {
      for (auto f : families) {
        if (suite[i].family == f) s.indices.push_back(i);
      }
    }
    return s;
  };
  if (id == "jpeg") return pick({OpFamily::JpegCompress});
  if (id == "blur") return pick({OpFamily::GaussianBlur});
  if (id == "rotation") return pick({OpFamily::Rotate});
  if (id == "scaling") return pick({OpFamily::Scale});
  if (id == "jpeg+scaling") return pick({OpFamily::JpegCompress, OpFamily::Scale});
  if (id == "all") return full_subset(suite.size(), "all");
  throw Error(ErrorKind::InvalidArgument, "unknown operation subset '" + id + "'");
}

OperationSubset full_subset(std::size_t n, std::string id) {
  OperationSubset s{std::move(id), std::vector<std::size_t>(n)};
  std::iota(s.indices.begin(), s.indices.end(), std::size_t{0});
  return s;
}

LabelTrace trace(const Image& img, const Classifier& backend, const OperationSuite& suite,
                 const std::string& image_id) {
  LabelTrace t;
  t.image_id = image_id;
  t.backend_id = backend.id();
  t.base = backend.classify_top5(img);
  t.post.reserve(suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    try {
      t.post.push_back(backend.classify_top5(apply(suite[i], img)));
    } catch (const Error& e) {
      throw Error(e.kind(), "operation " + std::to_string(i + 1) + " (" + suite[i].name() + "): " + e.what());
    }
  }
  return t;
}

std::string to_string(FeatureKind kind) { return kind == FeatureKind::Counting ? "count" : "diff"; }

FeatureKind parse_feature_kind(const std::string& text) {
  if (text == "count" || text == "counting") return FeatureKind::Counting;
  if (text == "diff" || text == "differences") return FeatureKind::Differences;
  throw Error(ErrorKind::InvalidArgument, "unknown feature kind '" + text + "'");
}

FeatureVector counting_feature(const LabelTrace& t, const OperationSubset& subset) {
  check_subset(t, subset);
  FeatureVector f{FeatureKind::Counting, subset.id, t.backend_id, std::vector<std::int32_t>(kTopK, 0)};
  for (auto i : subset.indices) {
    for (int p = 0; p < kTopK; ++p) f.values[p] += t.post[i].labels[p] == t.base.labels[p];
  }
  return f;
}

FeatureVector differences_feature(const LabelTrace& t, const OperationSubset& subset) {
  check_subset(t, subset);
  FeatureVector f{FeatureKind::Differences, subset.id, t.backend_id, {}};
  f.values.reserve(subset.size() * kTopK);
  for (auto i : subset.indices) {
    for (int p = 0; p < kTopK; ++p) f.values.push_back(t.post[i].labels[p] != t.base.labels[p]);
  }
  return f;
}

FeatureVector extract_feature(const LabelTrace& t, const OperationSubset& subset, FeatureKind kind) {
  return kind == FeatureKind::Counting ? counting_feature(t, subset) : differences_feature(t, subset);
}

// ---------------------------------------------------------------------------

std::vector<FeatureRow> FeatureTable::split_rows(const std::string& split) const {
  std::vector<FeatureRow> out;
  for (const auto& r : rows) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::string write_feature_table(const FeatureTable& table) {
  std::ostringstream os;
  const json header{{"format", "advdetect-features"},
                    {"version", 1},
                    {"feature_kind", to_string(table.kind)},
                    {"subset_id", table.subset_id},
                    {"provenance", table.provenance}};
  os << "# " << header.dump() << '\n';
  os << "image_id,split,is_adversarial,attack_family,backend_id,subset_id";
  const std::size_t dim = table.dimension();
  if (table.kind == FeatureKind::Counting) {
    for (std::size_t p = 0; p < dim; ++p) os << ",C_" << kPositionNames[p % kTopK];
  } else {
    for (std::size_t k = 0; k < dim; ++k) os << ",D" << (k / kTopK + 1) << '_' << kPositionNames[k % kTopK];
  }
  os << '\n';
  for (const auto& r : table.rows) {
    if (r.values.size() != dim) throw Error(ErrorKind::FeatureMismatch, "ragged feature table");
    os << r.image_id << ',' << r.split << ',' << (r.is_adversarial ? 1 : 0) << ',' << r.attack_family << ','
       << r.backend_id << ',' << table.subset_id;
    for (auto v : r.values) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

FeatureTable parse_feature_table(const std::string& text) {
  std::istringstream is(text);
  FeatureTable table;
  std::string line;
  bool have_meta = false;
  bool have_columns = false;
  std::size_t columns = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!have_meta) {
        try {
          const json meta = json::parse(line.substr(1));
          if (meta.value("format", "") != "advdetect-features") throw Error(ErrorKind::FormatError, "not a feature file");
          if (meta.value("version", 0) != 1) throw Error(ErrorKind::VersionMismatch, "unsupported feature file version");
          table.kind = parse_feature_kind(meta.at("feature_kind").get<std::string>());
          table.subset_id = meta.at("subset_id").get<std::string>();
          table.provenance = meta.value("provenance", json::object());
          have_meta = true;
        } catch (const json::exception& e) {
          throw Error(ErrorKind::FormatError, std::string("bad feature file header: ") + e.what());
        }
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!have_columns) {
      if (cells.size() < 6 || cells[0] != "image_id") throw Error(ErrorKind::FormatError, "missing feature header row");
      columns = cells.size();
      have_columns = true;
      continue;
    }
    if (cells.size() != columns) throw Error(ErrorKind::FormatError, "feature row has wrong column count");
    FeatureRow r;
    r.image_id = cells[0];
    r.split = cells[1];
    r.is_adversarial = cells[2] == "1";
    r.attack_family = cells[3];
    r.backend_id = cells[4];
    if (cells[5] != table.subset_id) throw Error(ErrorKind::FeatureMismatch, "row subset differs from file subset");
    for (std::size_t k = 6; k < cells.size(); ++k) {
      std::int32_t v = 0;
      const auto* end = cells[k].data() + cells[k].size();
      if (std::from_chars(cells[k].data(), end, v).ptr != end) {
        throw Error(ErrorKind::FormatError, "non-integer feature value '" + cells[k] + "'");
      }
      r.values.push_back(v);
    }
    table.rows.push_back(std::move(r));
  }
  if (!have_meta || !have_columns) throw Error(ErrorKind::FormatError, "incomplete feature file");
  return table;
}

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
  const std::string text = write_feature_table(table);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_feature_table(std::string(bytes.begin(), bytes.end()));
}

}  // namespace advdetect
