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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "advdetect/codec.hpp"
#include "advdetect/pipeline.hpp"
#include "support.hpp"

namespace advdetect {
namespace {

namespace fs = std::filesystem;

const std::string kCli = ADVDETECT_CLI;
const fs::path kGolden = GOLDEN_DIR;

// Runs the CLI with output captured to <dir>/cli.log; returns the exit code.
int cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = kCli + " " + args + " >>" + (dir / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_line(const fs::path& dir) {
  std::ifstream in(dir / "cli.log");
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

std::string slurp(const fs::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

// Small end-to-end run: desk model, dataset, features, detector, reports.
void run_pipeline(const fs::path& d) {
  const std::string m = (d / "desk.bin").string();
  const std::string man = (d / "data" / "manifest.jsonl").string();
  const std::string rep = (d / "rep").string();
  ASSERT_EQ(cli(d, "train-desk-model --train-count 600 --test-count 200 --epochs 10 --out " + m + " --report-dir " +
                       rep),
            0);
  ASSERT_EQ(cli(d, "build-dataset --model " + m + " --pool-count 300 --normal-count 40 --workers 2 --out " +
                       (d / "data").string() + " --report-dir " + rep),
            0);
  ASSERT_EQ(cli(d, "measure-effects --model " + m + " --manifest " + man + " --ops jpeg:60 scale:0.75 --report-dir " +
                       rep),
            0);
  ASSERT_EQ(cli(d, "extract-features --model " + m + " --manifest " + man + " --feature diff --subset jpeg+scaling "
                       "--out " + (d / "features.csv").string()),
            0);
  ASSERT_EQ(cli(d, "train-detector --features " + (d / "features.csv").string() + " --detector forest --out " +
                       (d / "forest.bin").string()),
            0);
  ASSERT_EQ(cli(d, "evaluate-detector --detector-model " + (d / "forest.bin").string() + " --features " +
                       (d / "features.csv").string() + " --report-dir " + rep),
            0);
  ASSERT_EQ(cli(d, "correct --model " + m + " --manifest " + man + " --split all --report-dir " + rep), 0);
  ASSERT_EQ(cli(d, "report --report-dir " + rep), 0);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("pipeline_a");
    run_pipeline(dir_);
  }
  static fs::path dir_;
};

fs::path Pipeline::dir_;

TEST_F(Pipeline, ProducesEveryArtifact) {
  for (const char* f : {"desk.bin", "data/manifest.jsonl", "features.csv", "forest.bin", "rep/effects.txt",
                        "rep/effects.csv", "rep/correction.txt", "rep/report.txt", "rep/desk_model.json",
                        "rep/dataset.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  const auto manifest = DatasetManifest::load(dir_ / "data" / "manifest.jsonl");
  EXPECT_EQ(manifest.provenance["tool_version"], "0.1.0");
  EXPECT_TRUE(manifest.provenance["seeds"].contains("split"));
  const auto features = load_feature_table(dir_ / "features.csv");
  EXPECT_EQ(features.dimension(), 26u * 5u);
  EXPECT_EQ(features.rows.size(), manifest.entries.size());
  EXPECT_TRUE(features.provenance.contains("config_digest"));
}

TEST_F(Pipeline, RerunsAreNoOps) {
  const std::string m = (dir_ / "desk.bin").string();
  const std::string man = (dir_ / "data" / "manifest.jsonl").string();
  const std::string before = slurp(dir_ / "data" / "manifest.jsonl");
  const auto stamp = fs::last_write_time(dir_ / "features.csv");
  const std::string commands[] = {
      "train-desk-model --train-count 600 --test-count 200 --epochs 10 --out " + m,
      "build-dataset --model " + m + " --pool-count 300 --normal-count 40 --out " + (dir_ / "data").string(),
      "measure-effects --model " + m + " --manifest " + man + " --ops jpeg:60 scale:0.75 --report-dir " +
          (dir_ / "rep").string(),
      "extract-features --model " + m + " --manifest " + man + " --feature diff --subset jpeg+scaling --out " +
          (dir_ / "features.csv").string(),
      "train-detector --features " + (dir_ / "features.csv").string() + " --detector forest --out " +
          (dir_ / "forest.bin").string(),
      "evaluate-detector --detector-model " + (dir_ / "forest.bin").string() + " --features " +
          (dir_ / "features.csv").string() + " --report-dir " + (dir_ / "rep").string(),
      "correct --model " + m + " --manifest " + man + " --split all --report-dir " + (dir_ / "rep").string()};
  for (const auto& c : commands) {
    ASSERT_EQ(cli(dir_, c), 0) << c;
    std::ifstream in(dir_ / "cli.log");
    std::string all((std::istreambuf_iterator<char>(in)), {});
    const auto pos = all.rfind("up to date");
    EXPECT_NE(pos, std::string::npos);
    EXPECT_EQ(all.find('\n', all.rfind('\n', pos) + 1), all.find('\n', pos)) << c;
  }
  EXPECT_EQ(slurp(dir_ / "data" / "manifest.jsonl"), before);
  EXPECT_EQ(fs::last_write_time(dir_ / "features.csv"), stamp);
  // Forcing recomputes and reproduces the same bytes.
  ASSERT_EQ(cli(dir_, commands[3] + " --force"), 0);
  EXPECT_EQ(last_line(dir_).rfind("features:", 0), 0u) << last_line(dir_);
}

TEST_F(Pipeline, IdenticalSeedsGiveIdenticalArtifacts) {
  const fs::path other = testing::scratch_dir("pipeline_b");
  run_pipeline(other);
  for (const char* f : {"desk.bin", "data/manifest.jsonl", "features.csv", "forest.bin"}) {
    EXPECT_EQ(read_file(dir_ / f), read_file(other / f)) << f;
  }
}

TEST_F(Pipeline, DatasetVerifiesFromDisk) {
  const std::string args = "verify-dataset --model " + (dir_ / "desk.bin").string() + " --manifest " +
                           (dir_ / "data" / "manifest.jsonl").string();
  EXPECT_EQ(cli(dir_, args), 0);
  const fs::path copy = testing::scratch_dir("pipeline_tamper");
  fs::copy(dir_ / "data", copy, fs::copy_options::recursive);
  const auto manifest = DatasetManifest::load(copy / "manifest.jsonl");
  Bytes b = read_file(copy / manifest.entries.back().path);
  b[b.size() / 2] ^= 1;
  write_file(copy / manifest.entries.back().path, b);
  EXPECT_EQ(cli(dir_, "verify-dataset --model " + (dir_ / "desk.bin").string() + " --manifest " +
                          (copy / "manifest.jsonl").string()),
            3);
}

TEST_F(Pipeline, NormalOnlyEffectsHaveAZeroOriginalColumn) {
  const fs::path d = testing::scratch_dir("pipeline_normals");
  fs::copy(dir_ / "data", d, fs::copy_options::recursive);
  auto manifest = DatasetManifest::load(d / "manifest.jsonl");
  std::erase_if(manifest.entries, [](const ManifestEntry& e) { return e.is_adversarial(); });
  manifest.save(d / "manifest.jsonl");
  ASSERT_EQ(cli(d, "measure-effects --model " + (dir_ / "desk.bin").string() + " --manifest " +
                       (d / "manifest.jsonl").string() + " --report-dir " + (d / "rep").string()),
            0);
  const auto t = EffectsTable::from_json(nlohmann::json::parse(slurp(d / "rep" / "effects.json")));
  ASSERT_EQ(t.row_types, std::vector<std::string>{"normal"});
  EXPECT_EQ(t.counts[0][0], 0);
  EXPECT_EQ(t.totals[0], static_cast<int>(manifest.entries.size()));
  EXPECT_EQ(t.operations.size(), default_effect_ops().size());
}

TEST_F(Pipeline, ReportRefusesMixedVersions) {
  const fs::path d = testing::scratch_dir("pipeline_versions");
  fs::copy(dir_ / "rep", d, fs::copy_options::recursive);
  ASSERT_EQ(cli(d, "report --report-dir " + d.string()), 0);
  auto j = nlohmann::json::parse(slurp(d / "effects.json"));
  j["provenance"]["tool_version"] = "0.0.9";
  write_text(d / "effects.json", j.dump());
  EXPECT_EQ(cli(d, "report --report-dir " + d.string()), 3);
  EXPECT_NE(last_line(d).find("VersionMismatch"), std::string::npos);
}

TEST(Cli, GoldenEvaluationMatchesTheFrozenReport) {
  const fs::path d = testing::scratch_dir("cli_golden");
  ASSERT_EQ(cli(d, "evaluate-detector --detector-model " + (kGolden / "lda.bin").string() + " --features " +
                       (kGolden / "features.csv").string() + " --report-dir " + d.string()),
            0);
  const auto report = nlohmann::json::parse(slurp(d / "detection" / "lda_diff_golden.json"));
  const auto frozen = nlohmann::json::parse(slurp(kGolden / "lda_eval.json"));
  EXPECT_EQ(report["report"], frozen);
}

TEST(Cli, ExitCodesFollowTheErrorClass) {
  const fs::path d = testing::scratch_dir("cli_codes");
  EXPECT_EQ(cli(d, "correct --manifest " + (d / "missing.jsonl").string() + " --report-dir " + d.string()), 2);
  EXPECT_EQ(cli(d, "report --report-dir " + (d / "nothing").string()), 2);
  EXPECT_EQ(cli(d, "train-detector --features " + (kGolden / "features.csv").string() + " --detector knn --out " +
                       (d / "x.bin").string()),
            3);
  EXPECT_EQ(cli(d, "build-dataset --epsilon 2 --out " + d.string()), 3);
  EXPECT_EQ(cli(d, "no-such-command"), 3);
  write_text(d / "garbage.bin", "not a model");
  EXPECT_EQ(cli(d, "evaluate-detector --detector-model " + (d / "garbage.bin").string() + " --features " +
                       (kGolden / "features.csv").string() + " --report-dir " + d.string()),
            3);
  EXPECT_EQ(cli(d, "build-dataset --backend exec:/nonexistent/classifier --out " + d.string()), 4);
  // A gradient-free backend fails every attack; failures are recorded per entry.
  ASSERT_EQ(cli(d, "build-dataset --backend exec:" + std::string(MOCK_BACKEND) + " --normal-count 5 --pool-count 20 "
                   "--out " + (d / "ds").string() + " --report-dir " + (d / "rep").string()),
            0);
  const auto summary = nlohmann::json::parse(slurp(d / "rep" / "dataset.json"));
  EXPECT_EQ(summary["failures"].size(), 10u);
  EXPECT_NE(summary["failures"][0]["error"].get<std::string>().find("gradients"), std::string::npos);
  EXPECT_EQ(cli(d, "codec-info"), 0);
  EXPECT_NE(slurp(d / "cli.log").find("4:4:4"), std::string::npos);
}

}  // namespace
}  // namespace advdetect
