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

// Runs every acceptance criterion and prints one PASS/FAIL line per
// criterion. Exit status is 0 only if all pass.
//
//   acceptance [work-dir]

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "advdetect/attacks.hpp"
#include "advdetect/correction.hpp"
#include "advdetect/parallel.hpp"
#include "advdetect/pipeline.hpp"
#include "../support.hpp"

namespace fs = std::filesystem;
using namespace advdetect;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [failed]");
  }
};

std::string fmt(double v, int digits = 4) { return format_fixed(v, digits); }

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// --- oracles ---------------------------------------------------------------

std::vector<std::int32_t> brute_count(const LabelTrace& t, const OperationSubset& s) {
  std::vector<std::int32_t> c(kTopK, 0);
  for (int p = 0; p < kTopK; ++p) {
    for (auto i : s.indices) c[p] += t.post[i].labels[p] == t.base.labels[p] ? 1 : 0;
  }
  return c;
}

std::vector<std::int32_t> brute_diff(const LabelTrace& t, const OperationSubset& s) {
  std::vector<std::int32_t> d;
  for (auto i : s.indices) {
    for (int p = 0; p < kTopK; ++p) d.push_back(t.post[i].labels[p] == t.base.labels[p] ? 0 : 1);
  }
  return d;
}

std::vector<std::pair<Label, int>> brute_vote(const LabelTrace& t, const OperationSubset& s) {
  std::map<Label, std::pair<int, int>> tally;
  for (auto i : s.indices) {
    for (int p = 0; p < kTopK; ++p) {
      tally[t.post[i].labels[p]].first += 1;
      tally[t.post[i].labels[p]].second += p;
    }
  }
  std::vector<std::pair<Label, int>> out;
  while (out.size() < 5 && !tally.empty()) {
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
      const double mean = static_cast<double>(it->second.second) / it->second.first;
      const double best_mean = static_cast<double>(best->second.second) / best->second.first;
      if (it->second.first > best->second.first ||
          (it->second.first == best->second.first && mean < best_mean - 1e-12)) {
        best = it;
      }
    }
    out.emplace_back(best->first, best->second.first);
    tally.erase(best);
  }
  return out;
}

Image dense_blur(const Image& img, double radius) {
  const int half = static_cast<int>(std::ceil(2.0 * radius));
  std::vector<double> k;
  double total = 0;
  for (int i = -half; i <= half; ++i) {
    k.push_back(std::exp(-0.5 * i * i / (radius * radius)));
    total += k.back();
  }
  for (double& v : k) v /= total;
  Image out(img.width(), img.height());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx)
            acc += k[dy + half] * k[dx + half] *
                   img.at(std::clamp(y + dy, 0, img.height() - 1), std::clamp(x + dx, 0, img.width() - 1), c);
        out.at(y, x, c) = acc;
      }
  return out;
}

std::vector<LabelTrace> random_traces(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LabelTrace> traces;
  for (int i = 0; i < 1000; ++i) traces.push_back(advdetect::testing::random_trace(rng, 38, i % 2 ? 12 : 1000, 0.4));
  return traces;
}

// --- end-to-end run --------------------------------------------------------

struct Run {
  fs::path dir;
  double seconds = 0;
  nlohmann::json desk;
  nlohmann::json dataset;
  std::map<std::string, EvalReport> detection;
  CorrectionSummary correction;
};

const std::vector<DetectorKind> kDetectors = {DetectorKind::LDA, DetectorKind::MLP, DetectorKind::LinearSVM,
                                              DetectorKind::RandomForest};

Run full_run(const fs::path& dir) {
  const auto start = Clock::now();
  fs::remove_all(dir);
  fs::create_directories(dir);
  Run r;
  r.dir = dir;
  const fs::path rep = dir / "rep";
  const int workers = default_workers();

  DeskStageOptions desk;
  desk.model_out = dir / "desk.bin";
  desk.report_dir = rep;
  train_desk_stage(desk, &r.desk);

  BuildOptions build;
  build.model = desk.model_out;
  build.normal_count = 1400;
  build.out_dir = dir / "data";
  build.report_dir = rep;
  build.workers = workers;
  build_dataset_stage(build, &r.dataset);
  const fs::path manifest = build.out_dir / kManifestName;

  EffectsOptions effects;
  effects.manifest = manifest;
  effects.model = desk.model_out;
  effects.report_dir = rep;
  effects.workers = workers;
  measure_effects_stage(effects);

  FeatureOptions features;
  features.manifest = manifest;
  features.model = desk.model_out;
  features.kind = FeatureKind::Differences;
  features.subset = "all";
  features.out = dir / "features_diff_all.csv";
  features.workers = workers;
  extract_features_stage(features);

  for (auto kind : kDetectors) {
    DetectorOptions d;
    d.features = features.out;
    d.kind = kind;
    d.model_out = dir / ("detector_" + to_string(kind) + ".bin");
    train_detector_stage(d);
    EvaluateOptions e;
    e.model = d.model_out;
    e.features = features.out;
    e.balance_seed = 1;
    e.report_dir = rep;
    evaluate_detector_stage(e, &r.detection[to_string(kind)]);
  }

  CorrectionOptions correct;
  correct.manifest = manifest;
  correct.model = desk.model_out;
  correct.report_dir = rep;
  correct.workers = workers;
  correct_stage(correct, &r.correction);
  report_stage(rep);
  r.seconds = seconds_since(start);
  return r;
}

// --- criteria --------------------------------------------------------------

Check criterion1() {
  Check v;
  const auto traces = random_traces(1);
  const auto start = Clock::now();
  int mismatches = 0;
  for (const auto& t : traces) {
    for (const auto& id : canonical_subset_ids()) {
      const auto s = canonical_subset(id);
      mismatches += counting_feature(t, s).values != brute_count(t, s);
      mismatches += differences_feature(t, s).values != brute_diff(t, s);
    }
  }
  const double secs = seconds_since(start);
  v.require(mismatches == 0, std::to_string(mismatches) + " mismatches over 1000 traces x 6 subsets");
  v.require(secs < 5.0, fmt(secs, 3) + " s");
  return v;
}

Check criterion2() {
  Check v;
  long checks = 0, failures = 0;
  for (const auto& t : random_traces(2)) {
    for (const auto& id : canonical_subset_ids()) {
      const auto s = canonical_subset(id);
      const auto c = counting_feature(t, s).values;
      const auto d = differences_feature(t, s).values;
      for (int p = 0; p < kTopK; ++p) {
        long sum = c[p];
        for (std::size_t k = 0; k < s.size(); ++k) sum += d[k * kTopK + p];
        ++checks;
        failures += sum != static_cast<long>(s.size());
      }
    }
  }
  v.require(failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " identities hold");
  return v;
}

Check criterion3() {
  Check v;
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const Image img = advdetect::testing::random_image(rng, 16, 16);
    for (int r : {2, 3, 4, 5}) {
      worst = std::max(worst, (gaussian_blur(img, r).pixels() - dense_blur(img, r).pixels()).abs().maxCoeff());
    }
  }
  v.require(worst < 1e-6, "max abs error " + sci(worst));
  return v;
}

Check criterion4(const DeskModel& model) {
  Check v;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<Eigen::Index> coord(0, model.input_size() - 1);
  double worst = 0;
  for (const auto& li : generate_shapes(20, 404, "g")) {
    const Label y = li.label;
    const Eigen::ArrayXd g = model.input_gradient(li.image, y);
    for (int k = 0; k < 20; ++k) {
      const Eigen::Index i = coord(rng);
      Image plus = li.image, minus = li.image;
      plus.pixels()[i] += 1e-4;
      minus.pixels()[i] -= 1e-4;
      const double numeric = (model.loss(plus, y) - model.loss(minus, y)) / 2e-4;
      worst = std::max(worst, std::abs(numeric - g[i]) / std::max(std::abs(numeric) + std::abs(g[i]), 1e-8));
    }
  }
  v.require(worst < 1e-4, "max relative error " + sci(worst) + " over 400 coordinates");
  return v;
}

Check criterion5(const DeskBackend& backend) {
  Check v;
  const auto images = generate_shapes(100, 505, "a");
  const double eps = 8.0 / 255.0;
  int outputs = 0, violations = 0;
  for (auto family : {AttackFamily::FGSM, AttackFamily::Gradient, AttackFamily::BIM, AttackFamily::PGD,
                      AttackFamily::L1Iter, AttackFamily::L2Iter}) {
    for (auto mode : {AttackMode::NonTargeted, AttackMode::Targeted}) {
      for (int i = 0; i < 20; ++i) {
        AttackConfig c = parse_attack_spec(to_string(family) + ":" + to_string(mode), AttackConfig{});
        c.seed = static_cast<std::uint64_t>(i);
        const Image& img = images[static_cast<std::size_t>(i)].image;
        const auto o = run_attack(c, backend, img);
        if (!o.success) continue;
        ++outputs;
        const Eigen::ArrayXd& a = o.adversarial->pixels();
        violations += (a - img.pixels()).abs().maxCoeff() > eps + 1e-9 || a.minCoeff() < 0.0 || a.maxCoeff() > 1.0;
      }
    }
  }
  v.require(outputs > 0 && violations == 0,
            std::to_string(outputs - violations) + "/" + std::to_string(outputs) + " successful outputs in budget");
  int identical = 0;
  for (const auto& li : images) {
    AttackConfig pgd;
    pgd.family = AttackFamily::PGD;
    pgd.random_start = false;
    pgd.step_size = pgd.epsilon;
    pgd.max_iterations = 1;
    AttackConfig fgsm = parse_attack_spec("fgsm", AttackConfig{});
    const auto a = run_attack(pgd, backend, li.image);
    const auto b = run_attack(fgsm, backend, li.image);
    bool same = a.success == b.success && a.final_top5 == b.final_top5 && a.norms.l2 == b.norms.l2;
    if (same && a.success) same = a.adversarial->pixels().cwiseEqual(b.adversarial->pixels()).all();
    identical += same;
  }
  v.require(identical == 100, std::to_string(identical) + "/100 PGD(1 step) == FGSM");
  return v;
}

Check criterion6(const Run& r) {
  Check v;
  const double top1 = r.desk.at("train_report").at("validation_top1").get<double>();
  v.require(top1 >= 0.95, "desk test top-1 " + fmt(top1));
  for (const char* tag : {"bim", "pgd"}) {
    const auto& a = r.dataset.at("attacks").at(tag);
    const double rate = a.at("kept_rate").get<double>();
    v.require(rate >= 0.5, std::string(tag) + " kept " + std::to_string(a.at("kept_after_persistence").get<int>()) +
                               "/" + std::to_string(a.at("attempted").get<int>()) + " = " + fmt(rate));
  }
  const int eval_size = r.detection.at("lda").total();
  v.require(eval_size >= 400, "balanced eval " + std::to_string(eval_size));
  for (auto kind : kDetectors) {
    const double acc = r.detection.at(to_string(kind)).accuracy;
    if (kind == DetectorKind::LDA || kind == DetectorKind::MLP) {
      v.require(acc >= 0.75, to_string(kind) + " " + fmt(acc));
    } else {
      v.detail << "; " << to_string(kind) << " " << fmt(acc) << " (reported)";
    }
  }
  v.require(r.seconds < 600.0, "run " + fmt(r.seconds, 1) + " s");
  return v;
}

Check criterion7(const Run& r) {
  Check v;
  int mismatches = 0;
  for (const auto& t : random_traces(7)) {
    for (const auto& id : canonical_subset_ids()) {
      const auto s = canonical_subset(id);
      const auto got = correct_labels(t, s);
      const auto want = brute_vote(t, s);
      bool same = got.corrected.size() == want.size();
      for (std::size_t k = 0; same && k < want.size(); ++k) {
        same = got.corrected[k] == want[k].first && got.votes[k] == want[k].second;
      }
      mismatches += !same;
    }
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " vote mismatches over 1000 traces");
  const auto& both = r.correction.row("jpeg+scaling");
  const double adv = both.adversarial_rate() / 100.0;
  const double normal = both.normal_rate() / 100.0;
  const double jpeg = r.correction.row("jpeg").adversarial_rate() / 100.0;
  const double scaling = r.correction.row("scaling").adversarial_rate() / 100.0;
  v.require(adv >= 0.5, "jpeg+scaling adversarial " + fmt(adv) + " of " + std::to_string(both.adversarial_total));
  v.require(normal >= 0.9, "normal retention " + fmt(normal) + " of " + std::to_string(both.normal_total));
  v.require(adv >= std::max(jpeg, scaling) - 0.05, "jpeg " + fmt(jpeg) + ", scaling " + fmt(scaling));
  return v;
}

Check criterion8(const Run& a, const Run& b) {
  Check v;
  std::vector<std::string> files = {"data/manifest.jsonl", "features_diff_all.csv", "desk.bin"};
  for (auto kind : kDetectors) files.push_back("detector_" + to_string(kind) + ".bin");
  for (const auto& f : files) v.require(read_file(a.dir / f) == read_file(b.dir / f), f + " identical");
  return v;
}

Check criterion9(const Run& r) {
  Check v;
  const auto m = DatasetManifest::load(r.dir / "data" / kManifestName);
  std::map<std::string, std::string> base_split;
  int misplaced = 0;
  for (const auto& e : m.entries) {
    if (!e.is_adversarial()) base_split[e.image_id] = e.split;
  }
  for (const auto& e : m.entries) {
    const auto it = base_split.find(e.base_id);
    misplaced += it == base_split.end() || it->second != e.split;
  }
  v.require(misplaced == 0, std::to_string(m.entries.size()) + " entries checked, " + std::to_string(misplaced) +
                                " away from their base");
  std::map<std::string, int> count;
  for (const auto& [id, split] : base_split) ++count[split];
  const double n = static_cast<double>(base_split.size());
  const double ratio[3] = {0.7, 0.15, 0.15};
  for (int s = 0; s < 3; ++s) {
    const int got = count[kSplitNames[s]];
    v.require(std::abs(got - n * ratio[s]) <= 1.0,
              kSplitNames[s] + " " + std::to_string(got) + " (ideal " + fmt(n * ratio[s], 1) + ")");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "advdetect_acceptance";
  std::map<int, Check> results;
  auto record = [&](int k, const std::function<Check()>& fn) {
    try {
      results[k] = fn();
    } catch (const std::exception& e) {
      results[k].pass = false;
      results[k].detail << "error: " << e.what();
    }
    std::cout << "CRITERION " << k << ' ' << (results[k].pass ? "PASS" : "FAIL") << ": " << results[k].detail.str()
              << std::endl;
  };

  record(1, criterion1);
  record(2, criterion2);
  record(3, criterion3);

  std::optional<Run> first;
  std::optional<Run> second;
  try {
    first = full_run(work / "run1");
    second = full_run(work / "run2");
  } catch (const std::exception& e) {
    std::cout << "end-to-end run failed: " << e.what() << std::endl;
  }
  auto with_run = [&](const std::function<Check(const Run&)>& fn) {
    return [&, fn] {
      if (!first) throw Error(ErrorKind::MissingInput, "no end-to-end run");
      return fn(*first);
    };
  };
  record(4, with_run([](const Run& r) { return criterion4(DeskModel::load(r.dir / "desk.bin")); }));
  record(5, with_run([](const Run& r) {
           const DeskBackend backend(std::make_shared<const DeskModel>(DeskModel::load(r.dir / "desk.bin")), "desk");
           return criterion5(backend);
         }));
  record(6, with_run(criterion6));
  record(7, with_run(criterion7));
  record(8, with_run([&](const Run& r) {
           if (!second) throw Error(ErrorKind::MissingInput, "no second run");
           return criterion8(r, *second);
         }));
  record(9, with_run(criterion9));

  int passed = 0;
  for (const auto& [k, v] : results) passed += v.pass;
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
