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

// advdetect: batch front-end for the detection pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "advdetect/parallel.hpp"
#include "advdetect/pipeline.hpp"
#include "advdetect/provenance.hpp"

namespace fs = std::filesystem;
using namespace advdetect;

namespace {

// Accepts "0.03" or "8/255".
double parse_budget(const std::string& text) {
  try {
    const auto slash = text.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    const double num = std::stod(text.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument(text);
    const std::string den_text = text.substr(slash + 1);
    const double den = std::stod(den_text, &used);
    if (used != den_text.size() || den == 0.0) throw std::invalid_argument(text);
    return num / den;
  } catch (const std::invalid_argument&) {
    throw Error(ErrorKind::InvalidArgument, "bad budget '" + text + "'");
  }
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::stringstream ss(text);
  std::string part;
  int k = 0;
  while (std::getline(ss, part, ':')) {
    if (k >= 3) throw Error(ErrorKind::InvalidArgument, "ratios need three parts, e.g. 7:1.5:1.5");
    r[k++] = parse_budget(part);
  }
  if (k != 3) throw Error(ErrorKind::InvalidArgument, "ratios need three parts, e.g. 7:1.5:1.5");
  return r;
}

void print(const StageStatus& s) { std::cout << (s.skipped ? "up to date: " : "") << s.summary << '\n'; }

struct Common {
  std::uint64_t seed = 1;
  int workers = default_workers();
  bool force = false;
  std::string report_dir;
  std::string backend = "desk";
  std::string model;

  std::optional<fs::path> model_path() const {
    return model.empty() ? std::nullopt : std::optional<fs::path>(model);
  }
};

void add_run_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
  cmd->add_option("--workers", c.workers, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", c.force, "Rerun even if outputs are up to date");
}

void add_backend_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--backend", c.backend, "desk or exec:<command>")->capture_default_str();
  cmd->add_option("--model", c.model, "Desk model file (desk backend)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial image detection by label changes under image processing"};
  app.set_config("--config", "", "TOML configuration file; flags take precedence");
  app.require_subcommand(1);
  Common c;

  // train-desk-model
  DeskStageOptions desk;
  std::string desk_data, desk_out;
  auto* train_desk = app.add_subcommand("train-desk-model", "Train the built-in desk classifier");
  add_run_flags(train_desk, c);
  train_desk->add_option("--data", desk_data, "Labelled image directory <dir>/<label>/<file>; synthetic if omitted");
  train_desk->add_option("--train-count", desk.train_count, "Synthetic training images")->capture_default_str();
  train_desk->add_option("--test-count", desk.test_count, "Synthetic test images")->capture_default_str();
  train_desk->add_option("--epochs", desk.train.epochs)->capture_default_str();
  train_desk->add_option("--learning-rate", desk.train.learning_rate)->capture_default_str();
  train_desk->add_option("--hidden", desk.train.hidden)->capture_default_str();
  train_desk->add_option("--out", desk_out, "Model file to write")->required();
  train_desk->add_option("--report-dir", c.report_dir);

  // build-dataset
  BuildOptions build;
  std::string pool_dir, import_dir, out_dir, epsilon, step, ratios = "7:1.5:1.5";
  std::vector<std::string> attacks;
  auto* build_cmd = app.add_subcommand("build-dataset", "Select normal images, attack them, persist and split");
  add_run_flags(build_cmd, c);
  add_backend_flags(build_cmd, c);
  build_cmd->add_option("--pool", pool_dir, "Labelled pool directory; synthetic if omitted");
  build_cmd->add_option("--pool-count", build.pool_count, "Synthetic pool size")->capture_default_str();
  build_cmd->add_option("--pool-seed", build.pool_seed, "Synthetic pool seed")->capture_default_str();
  build_cmd->add_option("--normal-count", build.normal_count, "Normal images to select")->capture_default_str();
  build_cmd->add_option("--attack", attacks, "family[:targeted], repeatable (default: bim pgd)");
  build_cmd->add_option("--epsilon", epsilon, "L-inf budget, e.g. 8/255");
  build_cmd->add_option("--steps", step, "Per-iteration step size, e.g. 1/255");
  build_cmd->add_option("--max-iter", build.attack_defaults.max_iterations)->capture_default_str();
  build_cmd->add_option("--ratios", ratios, "train:dev:eval")->capture_default_str();
  build_cmd->add_option("--import", import_dir, "Directory of external adversarial images with metadata.jsonl");
  build_cmd->add_option("--out", out_dir, "Dataset directory")->required();
  build_cmd->add_option("--report-dir", c.report_dir);

  // verify-dataset
  std::string manifest;
  auto* verify_cmd = app.add_subcommand("verify-dataset", "Re-check digests and adversarial criteria from disk");
  add_run_flags(verify_cmd, c);
  add_backend_flags(verify_cmd, c);
  verify_cmd->add_option("--manifest", manifest)->required();

  // measure-effects
  std::vector<std::string> ops;
  auto* effects_cmd = app.add_subcommand("measure-effects", "Count top-5 misclassifications per operation");
  add_run_flags(effects_cmd, c);
  add_backend_flags(effects_cmd, c);
  effects_cmd->add_option("--manifest", manifest)->required();
  effects_cmd->add_option("--ops", ops, "Operations such as jpeg:20 scale:0.75 (default: reported selection)");
  effects_cmd->add_option("--report-dir", c.report_dir)->required();

  // extract-features
  std::string feature = "diff", subset = "all", features_out;
  auto* features_cmd = app.add_subcommand("extract-features", "Write a feature matrix for one subset");
  add_run_flags(features_cmd, c);
  add_backend_flags(features_cmd, c);
  features_cmd->add_option("--manifest", manifest)->required();
  features_cmd->add_option("--feature", feature, "count or diff")->capture_default_str();
  features_cmd->add_option("--subset", subset, "jpeg|scaling|blur|rotation|jpeg+scaling|all")->capture_default_str();
  features_cmd->add_option("--out", features_out)->required();

  // train-detector
  std::string features_in, detector = "lda", detector_out, detector_config;
  bool no_select = false;
  auto* detector_cmd = app.add_subcommand("train-detector", "Train a normal/adversarial detector");
  add_run_flags(detector_cmd, c);
  detector_cmd->add_option("--features", features_in)->required();
  detector_cmd->add_option("--detector", detector, "lda|svm|mlp|forest")->capture_default_str();
  detector_cmd->add_option("--detector-config", detector_config, "JSON file with detector hyperparameters");
  detector_cmd->add_flag("--no-select", no_select, "Skip the dev-split regularizer search");
  detector_cmd->add_option("--out", detector_out)->required();

  // evaluate-detector
  std::string detector_model, split = "eval";
  std::optional<std::uint64_t> balance;
  auto* evaluate_cmd = app.add_subcommand("evaluate-detector", "Accuracy and confusion of a detector on one split");
  add_run_flags(evaluate_cmd, c);
  evaluate_cmd->add_option("--detector-model", detector_model)->required();
  evaluate_cmd->add_option("--features", features_in)->required();
  evaluate_cmd->add_option("--split", split, "train|dev|eval|all")->capture_default_str();
  evaluate_cmd->add_option("--balance", balance, "Subsample to equal classes with this seed");
  evaluate_cmd->add_option("--report-dir", c.report_dir)->required();

  // correct
  std::vector<std::string> subsets;
  std::string match = "top1-in-top5";
  auto* correct_cmd = app.add_subcommand("correct", "Recover original labels by voting over operations");
  add_run_flags(correct_cmd, c);
  add_backend_flags(correct_cmd, c);
  correct_cmd->add_option("--manifest", manifest)->required();
  correct_cmd->add_option("--subset", subsets, "Subsets to compare (default: jpeg scaling jpeg+scaling)");
  correct_cmd->add_option("--split", split, "train|dev|eval|all")->capture_default_str();
  correct_cmd->add_option("--match", match, "top1-in-top5|top1|tuple")->capture_default_str();
  correct_cmd->add_option("--report-dir", c.report_dir)->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "Render stored results as text and CSV");
  report_cmd->add_option("--report-dir", c.report_dir)->required();

  // codec-info / serve
  auto* codec_cmd = app.add_subcommand("codec-info", "Print the JPEG codec and its quality-100 behaviour");
  auto* serve_cmd = app.add_subcommand("serve", "Serve a desk model over the line protocol on stdin/stdout");
  serve_cmd->add_option("--model", c.model)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    const std::optional<fs::path> report_dir =
        c.report_dir.empty() ? std::nullopt : std::optional<fs::path>(c.report_dir);
    if (*train_desk) {
      desk.data_dir = desk_data.empty() ? std::nullopt : std::optional<fs::path>(desk_data);
      desk.data_seed = c.seed;
      desk.train.seed = c.seed;
      desk.model_out = desk_out;
      desk.report_dir = report_dir;
      desk.force = c.force;
      print(train_desk_stage(desk));
    } else if (*build_cmd) {
      build.backend = c.backend;
      build.model = c.model_path();
      build.pool_dir = pool_dir.empty() ? std::nullopt : std::optional<fs::path>(pool_dir);
      if (!attacks.empty()) build.attacks = attacks;
      if (!epsilon.empty()) build.attack_defaults.epsilon = parse_budget(epsilon);
      if (!step.empty()) build.attack_defaults.step_size = parse_budget(step);
      build.ratios = parse_ratios(ratios);
      build.seed = c.seed;
      build.import_dir = import_dir.empty() ? std::nullopt : std::optional<fs::path>(import_dir);
      build.out_dir = out_dir;
      build.report_dir = report_dir;
      build.workers = c.workers;
      build.force = c.force;
      print(build_dataset_stage(build));
    } else if (*verify_cmd) {
      const auto backend = open_backend(c.backend, c.model_path(), c.workers);
      const auto m = DatasetManifest::load(manifest);
      const auto problems = verify_manifest(m, fs::path(manifest).parent_path(), *backend, c.workers);
      for (const auto& p : problems) std::cerr << p << '\n';
      if (!problems.empty()) {
        throw Error(ErrorKind::VerificationFailed, std::to_string(problems.size()) + " entries failed verification");
      }
      std::cout << "verified " << m.entries.size() << " entries\n";
    } else if (*effects_cmd) {
      EffectsOptions o;
      o.manifest = manifest;
      o.backend = c.backend;
      o.model = c.model_path();
      if (!ops.empty()) o.ops = ops;
      o.report_dir = c.report_dir;
      o.workers = c.workers;
      o.force = c.force;
      EffectsTable t;
      print(measure_effects_stage(o, &t));
      std::cout << t.table().to_text();
    } else if (*features_cmd) {
      FeatureOptions o;
      o.manifest = manifest;
      o.backend = c.backend;
      o.model = c.model_path();
      o.kind = parse_feature_kind(feature);
      o.subset = subset;
      o.out = features_out;
      o.workers = c.workers;
      o.force = c.force;
      print(extract_features_stage(o));
    } else if (*detector_cmd) {
      DetectorOptions o;
      o.features = features_in;
      o.kind = parse_detector_kind(detector);
      if (!detector_config.empty()) o.config = DetectorConfig::from_json(nlohmann::json::parse(read_text(detector_config)));
      o.select_on_dev = !no_select;
      o.seed = c.seed;
      o.model_out = detector_out;
      o.force = c.force;
      print(train_detector_stage(o));
    } else if (*evaluate_cmd) {
      EvaluateOptions o;
      o.model = detector_model;
      o.features = features_in;
      o.split = split;
      o.balance_seed = balance;
      o.report_dir = c.report_dir;
      o.force = c.force;
      EvalReport r;
      print(evaluate_detector_stage(o, &r));
      std::cout << r.to_text();
    } else if (*correct_cmd) {
      CorrectionOptions o;
      o.manifest = manifest;
      o.backend = c.backend;
      o.model = c.model_path();
      if (!subsets.empty()) o.subsets = subsets;
      o.split = split;
      o.match = parse_correction_match(match);
      o.report_dir = c.report_dir;
      o.workers = c.workers;
      o.force = c.force;
      CorrectionSummary s;
      print(correct_stage(o, &s));
      std::cout << s.table().to_text();
    } else if (*report_cmd) {
      std::cout << report_stage(c.report_dir).summary;
    } else if (*codec_cmd) {
      Image gray = Image::constant(64, 64, 0.5);
      const Image once = jpeg_roundtrip_q100(gray);
      const Image twice = jpeg_roundtrip_q100(once);
      std::cout << "codec " << codec_info() << "\ntool " << kToolVersion << "\nquality-100 PSNR on mid grey "
                << format_fixed(psnr(gray, once), 2) << " dB\nsecond quality-100 round trip "
                << (quantize(once).bytes == quantize(twice).bytes ? "byte-identical" : "differs") << '\n';
    } else if (*serve_cmd) {
      const auto model = std::make_shared<const DeskModel>(DeskModel::load(c.model));
      std::ios::sync_with_stdio(false);
      serve_protocol(DeskBackend(model, "desk"), std::cin, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: FormatError: " << e.what() << '\n';
    return exit_code(ErrorKind::FormatError);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
