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

#include "advdetect/correction.hpp"

#include <algorithm>
#include <unordered_map>

namespace advdetect {

CorrectionResult correct_labels(const LabelTrace& t, const OperationSubset& subset) {
  if (subset.indices.empty()) throw Error(ErrorKind::InvalidArgument, "correction needs at least one operation");
  struct Tally {
    Label label;
    long count = 0;
    long position_sum = 0;
  };
  std::unordered_map<Label, std::size_t> slot;
  std::vector<Tally> tallies;
  for (auto i : subset.indices) {
    if (i >= t.post.size()) throw Error(ErrorKind::FeatureMismatch, "subset exceeds trace length");
    for (int p = 0; p < kTopK; ++p) {
      const Label l = t.post[i].labels[p];
      auto [it, fresh] = slot.try_emplace(l, tallies.size());
      if (fresh) tallies.push_back({l});
      Tally& tally = tallies[it->second];
      ++tally.count;
      tally.position_sum += p;
    }
  }
  // Mean positions compared exactly: sa/ca < sb/cb  <=>  sa*cb < sb*ca.
  std::sort(tallies.begin(), tallies.end(), [](const Tally& a, const Tally& b) {
    if (a.count != b.count) return a.count > b.count;
    const long lhs = a.position_sum * b.count;
    const long rhs = b.position_sum * a.count;
    if (lhs != rhs) return lhs < rhs;
    return a.label < b.label;
  });
  CorrectionResult r;
  r.subset_id = subset.id;
  r.complete = tallies.size() >= static_cast<std::size_t>(kTopK);
  for (std::size_t k = 0; k < tallies.size() && k < static_cast<std::size_t>(kTopK); ++k) {
    r.corrected.push_back(tallies[k].label);
    r.votes.push_back(static_cast<int>(tallies[k].count));
  }
  return r;
}

std::string to_string(CorrectionMatch mode) {
  switch (mode) {
    case CorrectionMatch::Top1InTop5: return "top1-in-top5";
    case CorrectionMatch::Top1Equal: return "top1";
    case CorrectionMatch::TupleEqual: return "tuple";
  }
  return "unknown";
}

CorrectionMatch parse_correction_match(const std::string& text) {
  for (auto m : {CorrectionMatch::Top1InTop5, CorrectionMatch::Top1Equal, CorrectionMatch::TupleEqual}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown correction match mode '" + text + "'");
}

bool is_corrected(const CorrectionResult& result, const Top5& reference, CorrectionMatch mode) {
  const auto& c = result.corrected;
  switch (mode) {
    case CorrectionMatch::Top1InTop5:
      return std::find(c.begin(), c.end(), reference.top1()) != c.end();
    case CorrectionMatch::Top1Equal:
      return !c.empty() && c.front() == reference.top1();
    case CorrectionMatch::TupleEqual:
      return std::equal(c.begin(), c.end(), reference.labels.begin(), reference.labels.end());
  }
  return false;
}

double correction_rate(const std::vector<CorrectionResult>& results, const std::vector<Top5>& references,
                       CorrectionMatch mode) {
  if (results.size() != references.size()) {
    throw Error(ErrorKind::InvalidArgument, "results and references differ in length");
  }
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < results.size(); ++i) hits += is_corrected(results[i], references[i], mode);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

}  // namespace advdetect
