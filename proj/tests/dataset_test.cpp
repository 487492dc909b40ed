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

#include <fstream>
#include <map>
#include <random>
#include <set>

#include "advdetect/dataset.hpp"
#include "advdetect/provenance.hpp"
#include "support.hpp"

namespace advdetect {
namespace {

const std::array<double, 3> kRatios = {7.0, 1.5, 1.5};

ManifestEntry entry(const std::string& id, const std::string& base, const std::string& attack = "") {
  ManifestEntry e;
  e.image_id = id;
  e.base_id = base;
  e.path = id + ".png";
  e.backend_id = "desk";
  e.origin = attack.empty() ? Origin::Normal : Origin::Attack;
  e.attack = attack;
  e.attack_mode = attack.empty() ? "" : "non-targeted";
  e.original_top5.labels = {1, 2, 3, 4, 5};
  e.post_save_top5.labels = {6, 7, 8, 9, 0};
  return e;
}

// 100 base images, each with two derivatives from three families: 300 entries.
DatasetManifest family_manifest(std::uint64_t seed) {
  const std::string families[] = {"bim", "pgd", "fgsm"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> skip(0, 2);
  DatasetManifest m;
  for (int b = 0; b < 100; ++b) {
    const std::string base = "n" + std::to_string(b);
    m.entries.push_back(entry(base, base));
    const int s = skip(rng);
    for (int f = 0; f < 3; ++f) {
      if (f != s) m.entries.push_back(entry(base + "_" + families[f], base, families[f]));
    }
  }
  return m;
}

const LabeledImages& pool() {
  static const LabeledImages images = generate_shapes(500, 31, "pool");
  return images;
}

const std::vector<SelectedImage>& selected100() {
  static const auto s = select_normal(pool(), testing::small_desk_backend(), 100, 5);
  return s;
}

AttackConfig bim(double epsilon) {
  AttackConfig c;
  c.family = AttackFamily::BIM;
  c.epsilon = epsilon;
  c.step_size = std::min(c.step_size, epsilon);
  return c;
}

const std::vector<AdversarialCandidate>& bim_candidates() {
  static const auto c = generate_adversarial(selected100(), testing::small_desk_backend(), {bim(8.0 / 255)}, 3);
  return c;
}

// Gradients from the desk model, but every answer is (0,1,2,3,4).
class StubbornBackend final : public Classifier {
 public:
  const std::string& id() const override { return id_; }
  int num_labels() const override { return 10; }
  std::string input_contract() const override { return "any"; }
  Top5 classify_top5(const Image&) const override {
    Top5 t;
    t.labels = {0, 1, 2, 3, 4};
    t.confidences = {0.6, 0.1, 0.1, 0.1, 0.1};
    return t;
  }
  const DeskModel* gradient_model() const override { return testing::small_desk_model().get(); }

 private:
  std::string id_ = "stubborn";
};

TEST(Split, CapacitiesFollowTheRatio) {
  EXPECT_EQ(split_capacities(20, kRatios), (std::array<std::size_t, 3>{14, 3, 3}));
  EXPECT_EQ(split_capacities(100, kRatios), (std::array<std::size_t, 3>{70, 15, 15}));
  EXPECT_EQ(split_capacities(7, kRatios), (std::array<std::size_t, 3>{5, 1, 1}));
  for (std::size_t n = 7; n < 400; n += 13) {
    const auto c = split_capacities(n, kRatios);
    EXPECT_EQ(c[0] + c[1] + c[2], n);
    for (int s = 0; s < 3; ++s) EXPECT_LE(std::abs(static_cast<double>(c[s]) - n * kRatios[s] / 10.0), 1.0);
  }
  EXPECT_THROW(split_capacities(2, kRatios), Error);
  try {
    split_capacities(3, kRatios);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RatioInfeasible);
  }
}

TEST(Split, TwentyNormalsGiveFourteenThreeThree) {
  DatasetManifest m;
  for (int i = 0; i < 20; ++i) m.entries.push_back(entry("n" + std::to_string(i), "n" + std::to_string(i)));
  split_manifest(m, kRatios, 1);
  std::map<std::string, int> count;
  for (const auto& e : m.entries) ++count[e.split];
  EXPECT_EQ(count["train"], 14);
  EXPECT_EQ(count["dev"], 3);
  EXPECT_EQ(count["eval"], 3);
}

TEST(Split, DerivativesShareTheirBaseSplit) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DatasetManifest m = family_manifest(seed);
    split_manifest(m, kRatios, seed);
    std::map<std::string, std::string> base_split;
    for (const auto& e : m.entries) {
      ASSERT_FALSE(e.split.empty());
      auto [it, fresh] = base_split.try_emplace(e.base_id, e.split);
      EXPECT_EQ(it->second, e.split) << e.image_id;
    }
  }
}

TEST(Split, FamiliesAreSpreadInProportion) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DatasetManifest m = family_manifest(seed);
    ASSERT_EQ(m.entries.size(), 300u);
    split_manifest(m, kRatios, seed + 100);
    std::map<std::string, std::array<int, 3>> per_family;
    for (const auto& e : m.entries) {
      const auto s = std::find(kSplitNames.begin(), kSplitNames.end(), e.split) - kSplitNames.begin();
      ++per_family[e.family_tag()][static_cast<std::size_t>(s)];
    }
    for (const auto& [family, counts] : per_family) {
      const int total = counts[0] + counts[1] + counts[2];
      for (int s = 0; s < 3; ++s) EXPECT_LE(std::abs(counts[s] - total * kRatios[s] / 10.0), 2.0) << family;
    }
  }
}

TEST(Split, IsAFunctionOfTheSeed) {
  DatasetManifest a = family_manifest(1), b = family_manifest(1), c = family_manifest(1);
  split_manifest(a, kRatios, 9);
  split_manifest(b, kRatios, 9);
  split_manifest(c, kRatios, 10);
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_NE(a.to_text(), c.to_text());
}

TEST(Manifest, RoundTripsThroughText) {
  DatasetManifest m = family_manifest(2);
  m.codec = "libjpeg";
  m.suite_version = 1;
  m.backend_id = "desk";
  m.num_labels = 10;
  m.provenance = {{"seed", 4}};
  m.entries[1].attack_mode = "targeted";
  m.entries[1].target = 7;
  split_manifest(m, kRatios, 3);
  const std::string text = m.to_text();
  const DatasetManifest back = DatasetManifest::parse(text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.entries[1].family_tag(), m.entries[1].family_tag());
  EXPECT_EQ(back.entries[1].criterion().target, 7);
  ASSERT_NE(back.find("n5"), nullptr);
  EXPECT_EQ(back.find("zzz"), nullptr);
  EXPECT_THROW(DatasetManifest::parse(text.substr(0, text.size() / 2)), Error);
  EXPECT_THROW(DatasetManifest::parse(""), Error);
}

TEST(SelectNormal, EdgeCases) {
  const auto& backend = testing::small_desk_backend();
  EXPECT_TRUE(select_normal(pool(), backend, 0, 1).empty());
  LabeledImages wrong;
  for (int i = 0; i < 20; ++i) {
    LabeledImage li = pool()[static_cast<std::size_t>(i)];
    const Top5 t = backend.classify_top5(li.image);
    li.label = 0;
    while (t.contains(li.label)) ++li.label;
    wrong.push_back(li);
  }
  try {
    select_normal(wrong, backend, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientCorrectImages);
  }
}

TEST(SelectNormal, PicksTopFiveCorrectImages) {
  const auto& s = selected100();
  ASSERT_EQ(s.size(), 100u);
  std::set<std::string> ids;
  for (const auto& x : s) {
    EXPECT_TRUE(top5_correct(testing::small_desk_backend().classify_top5(x.image.image), x.image.label));
    EXPECT_EQ(x.top5, testing::small_desk_backend().classify_top5(x.image.image));
    ids.insert(x.image.id);
  }
  EXPECT_EQ(ids.size(), 100u);
  const auto again = select_normal(pool(), testing::small_desk_backend(), 100, 5, 2);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(again[i].image.id, s[i].image.id);
}

TEST(Generate, ZeroBudgetKeepsNothing) {
  AttackConfig c = bim(0.0);
  c.step_size = 0.0;
  const std::vector<SelectedImage> few(selected100().begin(), selected100().begin() + 5);
  for (const auto& cand : generate_adversarial(few, testing::small_desk_backend(), {c}, 1)) {
    EXPECT_FALSE(cand.kept);
    EXPECT_TRUE(cand.jpeg.empty());
  }
}

TEST(Generate, StubbornBackendKeepsNothing) {
  const std::vector<SelectedImage> few(selected100().begin(), selected100().begin() + 5);
  const auto out = generate_adversarial(few, StubbornBackend{}, {bim(8.0 / 255)}, 1);
  ASSERT_EQ(out.size(), 5u);
  for (const auto& c : out) EXPECT_FALSE(c.kept);
}

TEST(Generate, FailuresAreRecordedPerEntry) {
  ExecBackend backend(std::string(MOCK_BACKEND) + " echo");
  const std::vector<SelectedImage> few(selected100().begin(), selected100().begin() + 3);
  const auto out = generate_adversarial(few, backend, {bim(8.0 / 255), bim(4.0 / 255)}, 1);
  ASSERT_EQ(out.size(), 6u);
  for (std::size_t k = 0; k < out.size(); ++k) {
    EXPECT_FALSE(out[k].kept);
    EXPECT_FALSE(out[k].failure.empty());
    EXPECT_EQ(out[k].base_index, k / 2);
    EXPECT_EQ(out[k].config_index, k % 2);
  }
}

TEST(Generate, KeptCountMatchesAnIndependentRecount) {
  const auto& backend = testing::small_desk_backend();
  const auto& cands = bim_candidates();
  ASSERT_EQ(cands.size(), 100u);
  int kept = 0, recount = 0;
  for (const auto& c : cands) {
    kept += c.kept;
    const Image& img = selected100()[c.base_index].image.image;
    const AttackOutcome o = run_attack(c.config, backend, img);
    if (!o.success) continue;
    const Image saved = dequantize<double>(decode_jpeg(encode_jpeg(quantize(*o.adversarial), 100)));
    const Top5 post = backend.classify_top5(saved);
    const Label original = backend.classify_top5(img).top1();
    recount += std::find(post.labels.begin(), post.labels.end(), original) == post.labels.end();
    if (c.kept) EXPECT_EQ(post, c.post_save_top5);
  }
  EXPECT_EQ(kept, recount);
  EXPECT_GT(kept, 0);
}

TEST(Generate, IsIndependentOfWorkerCount) {
  const std::vector<SelectedImage> few(selected100().begin(), selected100().begin() + 6);
  AttackConfig pgd = bim(8.0 / 255);
  pgd.family = AttackFamily::PGD;
  pgd.random_start = true;
  const auto a = generate_adversarial(few, testing::small_desk_backend(), {pgd}, 4, 1);
  const auto b = generate_adversarial(few, testing::small_desk_backend(), {pgd}, 4, 3);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].kept, b[k].kept);
    EXPECT_EQ(a[k].jpeg, b[k].jpeg);
    EXPECT_EQ(a[k].config.seed, attack_seed(4, k, 0));
  }
  EXPECT_NE(attack_seed(4, 1, 0), attack_seed(4, 0, 1));
}

// Writes kept BIM outputs plus one untouched normal into a directory with a
// sidecar.
std::filesystem::path import_fixture(int count) {
  const auto dir = testing::scratch_dir("import");
  std::ofstream sidecar(dir / std::string(kImportSidecar));
  int written = 0;
  for (const auto& c : bim_candidates()) {
    if (!c.kept || written == count) continue;
    const std::string file = "adv" + std::to_string(written++) + ".jpg";
    write_file(dir / file, c.jpeg);
    const auto& sel = selected100()[c.base_index];
    sidecar << nlohmann::json{{"file", file}, {"original_id", sel.image.id}, {"attack", "cw"},
                              {"original_label", sel.top5.top1()}, {"ground_truth", sel.image.label}}
                   .dump()
            << '\n';
  }
  return dir;
}

TEST(Import, EmptyDirectoryGivesNothing) {
  const auto r = import_external(testing::scratch_dir("import_empty"), testing::small_desk_backend());
  EXPECT_TRUE(r.accepted.empty());
  EXPECT_TRUE(r.skipped.empty());
  EXPECT_THROW(import_external(testing::scratch_dir("x") / "missing", testing::small_desk_backend()), Error);
}

TEST(Import, AcceptsVerifiedAdversarials) {
  const auto dir = import_fixture(5);
  const auto r = import_external(dir, testing::small_desk_backend());
  ASSERT_EQ(r.accepted.size(), 5u);
  EXPECT_TRUE(r.skipped.empty());
  for (const auto& a : r.accepted) {
    EXPECT_EQ(a.entry.origin, Origin::Imported);
    EXPECT_EQ(a.entry.attack, "cw");
    EXPECT_EQ(a.entry.sha256, sha256_hex(a.bytes));
  }
}

TEST(Import, SkipsImagesThatStillClassifyCorrectly) {
  const auto dir = import_fixture(2);
  const auto& sel = selected100()[0];
  save_png(dir / "clean.png", sel.image.image);
  std::ofstream(dir / std::string(kImportSidecar), std::ios::app)
      << nlohmann::json{{"file", "clean.png"}, {"original_id", sel.image.id}, {"attack", "cw"},
                        {"original_label", sel.top5.top1()}}
             .dump()
      << '\n';
  save_png(dir / "orphan.png", sel.image.image);
  const auto r = import_external(dir, testing::small_desk_backend());
  EXPECT_EQ(r.accepted.size(), 2u);
  ASSERT_EQ(r.skipped.size(), 2u);
  std::map<std::string, ErrorKind> reasons;
  for (const auto& s : r.skipped) reasons[s.file] = s.reason;
  EXPECT_EQ(reasons.at("clean.png"), ErrorKind::VerificationFailed);
  EXPECT_EQ(reasons.at("orphan.png"), ErrorKind::MetadataMissing);
}

TEST(Import, NeedsTheSidecar) {
  const auto dir = testing::scratch_dir("import_nosidecar");
  save_png(dir / "a.png", selected100()[0].image.image);
  try {
    import_external(dir, testing::small_desk_backend());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MetadataMissing);
  }
}

TEST(VerifyManifest, DetectsChangedFiles) {
  const auto dir = testing::scratch_dir("verify");
  const auto& backend = testing::small_desk_backend();
  DatasetManifest m;
  for (const auto& c : bim_candidates()) {
    if (!c.kept) continue;
    const auto& sel = selected100()[c.base_index];
    ManifestEntry e = entry("a" + std::to_string(c.base_index), sel.image.id, "bim");
    e.path = e.image_id + ".jpg";
    e.original_top5 = sel.top5;
    e.post_save_top5 = c.post_save_top5;
    e.sha256 = sha256_hex(c.jpeg);
    write_file(dir / e.path, c.jpeg);
    m.entries.push_back(e);
    ManifestEntry n = entry(sel.image.id, sel.image.id);
    n.ground_truth = sel.image.label;
    const Bytes png = encode_png(quantize(sel.image.image));
    n.sha256 = sha256_hex(png);
    write_file(dir / n.path, png);
    m.entries.push_back(n);
    if (m.entries.size() >= 8) break;
  }
  ASSERT_EQ(m.entries.size(), 8u);
  EXPECT_TRUE(verify_manifest(m, dir, backend).empty());
  EXPECT_TRUE(verify_manifest(m, dir, backend, 3).empty());

  Bytes bytes = read_file(dir / m.entries[0].path);
  bytes[bytes.size() / 2] ^= 0x10;
  write_file(dir / m.entries[0].path, bytes);
  m.entries[2].post_save_top5.confidences[4] += 0.01;
  std::filesystem::remove(dir / m.entries[5].path);
  const auto problems = verify_manifest(m, dir, backend);
  ASSERT_EQ(problems.size(), 3u);
  EXPECT_NE(problems[0].find("digest"), std::string::npos);
}

}  // namespace
}  // namespace advdetect
