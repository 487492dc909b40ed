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

// Writes the frozen detector fixtures under the given directory:
// <kind>.bin for each golden kind, verdicts.json with the probe verdicts,
// features.csv (fresh rows from the same distribution, as an eval split) and
// lda_eval.json, the LDA report on it.

#include <fstream>
#include <iostream>

#include "golden_data.hpp"

using namespace advdetect;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  nlohmann::json verdicts;
  for (const char* kind : testing::kGoldenKinds) {
    const DetectorModel m = testing::train_golden(kind);
    m.save(dir / (std::string(kind) + ".bin"), {{"fixture", "golden"}});
    for (const auto& p : testing::golden_probes()) {
      FeatureVector f{FeatureKind::Differences, "golden", "desk", p};
      verdicts[kind].push_back(static_cast<int>(m.predict(f)));
    }
  }
  std::ofstream(dir / "verdicts.json") << verdicts.dump(1) << '\n';

  FeatureTable table = testing::golden_table(2025);
  for (auto& r : table.rows) r.split = "eval";
  save_feature_table(dir / "features.csv", table);
  const auto lda = DetectorModel::load(dir / "lda.bin");
  std::ofstream(dir / "lda_eval.json") << evaluate(lda, table.rows, "eval").to_json().dump(1) << '\n';
  return 0;
}
