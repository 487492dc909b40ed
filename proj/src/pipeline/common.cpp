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

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "advdetect/parallel.hpp"
#include "advdetect/pipeline.hpp"
#include "advdetect/provenance.hpp"

namespace advdetect {

using nlohmann::json;
namespace fs = std::filesystem;

std::string file_digest(const fs::path& path) { return sha256_hex(read_file(path)); }

namespace {
fs::path stamp_path(const fs::path& output) { return fs::path(output.string() + ".stamp"); }
}  // namespace

bool stage_current(const fs::path& output, const std::string& digest) {
  if (!fs::exists(output) || !fs::exists(stamp_path(output))) return false;
  return read_text(stamp_path(output)) == digest + "\n";
}

void write_stamp(const fs::path& output, const std::string& digest) { write_text(stamp_path(output), digest + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const Bytes bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

std::string format_fixed(double value, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << value;
  return os.str();
}

std::string TextTable::to_text() const {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << cell;
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << cell;
      }
    }
    os << '\n';
  };
  emit(header);
  std::size_t rule = 0;
  for (auto w : width) rule += w + 2;
  os << std::string(rule > 2 ? rule - 2 : 0, '-') << '\n';
  for (const auto& row : rows) emit(row);
  return os.str();
}

std::string TextTable::to_csv() const {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
  };
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) os << (c ? "," : "") << quote(cells[c]);
    os << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return os.str();
}

std::unique_ptr<Classifier> open_backend(const std::string& selector, const std::optional<fs::path>& model,
                                         int workers) {
  std::shared_ptr<const DeskModel> desk;
  if (selector == "desk") {
    if (!model) throw Error(ErrorKind::MissingInput, "the desk backend needs --model");
    desk = std::make_shared<const DeskModel>(DeskModel::load(*model));
  }
  return make_backend(selector, std::move(desk), workers);
}

namespace {

std::string sanitize(const std::string& id) {
  std::string out = id;
  for (char& ch : out) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return out;
}

}  // namespace

std::vector<LabelTrace> ensure_traces(const fs::path& manifest_path, const Classifier& backend, int workers,
                                      bool force) {
  const fs::path out = manifest_path.parent_path() / ("traces-" + sanitize(backend.id()) + ".jsonl");
  const json key{{"stage", "traces"},
                 {"manifest", file_digest(manifest_path)},
                 {"backend", backend.id()},
                 {"suite_version", kSuiteVersion},
                 {"tool_version", kToolVersion}};
  const std::string digest = config_digest(key);
  const DatasetManifest manifest = DatasetManifest::load(manifest_path);

  if (!force && stage_current(out, digest)) {
    std::istringstream is(read_text(out));
    std::string line;
    std::getline(is, line);
    std::vector<LabelTrace> traces;
    while (std::getline(is, line)) {
      if (!line.empty()) traces.push_back(LabelTrace::from_json(json::parse(line)));
    }
    if (traces.size() == manifest.entries.size()) return traces;
  }

  const fs::path root = manifest_path.parent_path();
  std::vector<LabelTrace> traces(manifest.entries.size());
  parallel_for(traces.size(), workers, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    traces[i] = trace(load_image(root / e.path), backend, canonical_suite(), e.image_id);
  });

  std::ostringstream os;
  os << json{{"format", "advdetect-traces"}, {"version", 1}, {"key", key}, {"count", traces.size()}}.dump() << '\n';
  for (const auto& t : traces) os << t.to_json().dump() << '\n';
  write_text(out, os.str());
  write_stamp(out, digest);
  return traces;
}

}  // namespace advdetect
