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

#include <map>
#include <string>
#include <vector>

#include "advdetect/features.hpp"

namespace advdetect {

struct CorrectionResult {
  /// Up to five labels, most frequent first.
  std::vector<Label> corrected;
  /// Frequency of each entry of `corrected`.
  std::vector<int> votes;
  std::string subset_id;
  /// False when fewer than five distinct labels were observed.
  bool complete = true;
};

/// Counts every label at every position of the subset's post-operation
/// tuples (the base tuple does not vote) and keeps the five most frequent.
/// Equal counts prefer the lower mean position, then the lower label id.
CorrectionResult correct_labels(const LabelTrace& t, const OperationSubset& subset);

enum class CorrectionMatch {
  /// Reference top-1 appears anywhere in the corrected five.
  Top1InTop5,
  /// Corrected top-1 equals the reference top-1.
  Top1Equal,
  /// Corrected five equal the reference five in order.
  TupleEqual,
};

std::string to_string(CorrectionMatch mode);
CorrectionMatch parse_correction_match(const std::string& text);

bool is_corrected(const CorrectionResult& result, const Top5& reference, CorrectionMatch mode);

/// Percentage (0..100) of results that match their references.
double correction_rate(const std::vector<CorrectionResult>& results, const std::vector<Top5>& references,
                       CorrectionMatch mode = CorrectionMatch::Top1InTop5);

}  // namespace advdetect
