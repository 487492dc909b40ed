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

#include "advdetect/attacks.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "advdetect/image_ops.hpp"

namespace advdetect {

std::string to_string(AttackFamily family) {
  switch (family) {
    case AttackFamily::FGSM: return "fgsm";
    case AttackFamily::Gradient: return "gradient";
    case AttackFamily::BIM: return "bim";
    case AttackFamily::PGD: return "pgd";
    case AttackFamily::L1Iter: return "l1-iter";
    case AttackFamily::L2Iter: return "l2-iter";
  }
  return "unknown";
}

std::string to_string(AttackMode mode) { return mode == AttackMode::Targeted ? "targeted" : "non-targeted"; }

AttackFamily parse_attack_family(const std::string& text) {
  for (auto f : {AttackFamily::FGSM, AttackFamily::Gradient, AttackFamily::BIM, AttackFamily::PGD,
                 AttackFamily::L1Iter, AttackFamily::L2Iter}) {
    if (to_string(f) == text) return f;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown attack family '" + text + "'");
}

AttackMode parse_attack_mode(const std::string& text) {
  if (text == "targeted" || text == "t") return AttackMode::Targeted;
  if (text == "non-targeted" || text == "untargeted" || text == "nt") return AttackMode::NonTargeted;
  throw Error(ErrorKind::InvalidArgument, "unknown attack mode '" + text + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0,1]");
  if (epsilon > 0.0 && !(step_size > 0.0 && step_size <= epsilon)) {
    throw Error(ErrorKind::InvalidArgument, "step size must lie in (0, epsilon]");
  }
  if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max iterations must be at least 1");
  if (!(target_confidence > 0.0 && target_confidence <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "target confidence must lie in (0,1]");
  }
}

nlohmann::json AttackConfig::to_json() const {
  return {{"family", to_string(family)},
          {"mode", to_string(mode)},
          {"epsilon", epsilon},
          {"step_size", step_size},
          {"max_iterations", max_iterations},
          {"target_confidence", target_confidence},
          {"target_shift", target_shift},
          {"random_start", random_start},
          {"seed", seed}};
}

AttackConfig AttackConfig::from_json(const nlohmann::json& j) {
  AttackConfig c;
  c.family = parse_attack_family(j.at("family").get<std::string>());
  c.mode = parse_attack_mode(j.at("mode").get<std::string>());
  c.epsilon = j.at("epsilon").get<double>();
  c.step_size = j.at("step_size").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.target_confidence = j.at("target_confidence").get<double>();
  c.target_shift = j.at("target_shift").get<int>();
  c.random_start = j.at("random_start").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string AttackConfig::tag() const {
  return to_string(family) + (mode == AttackMode::Targeted ? "-t" : "");
}

AttackConfig parse_attack_spec(const std::string& text, const AttackConfig& defaults) {
  AttackConfig c = defaults;
  const auto colon = text.find(':');
  c.family = parse_attack_family(text.substr(0, colon));
  c.mode = colon == std::string::npos ? AttackMode::NonTargeted : parse_attack_mode(text.substr(colon + 1));
  c.random_start = c.family == AttackFamily::PGD;
  if (c.family == AttackFamily::FGSM || c.family == AttackFamily::Gradient) {
    c.step_size = c.epsilon;
    c.max_iterations = 1;
  }
  c.validate();
  return c;
}

Label shifted_target(Label top1, int num_labels, int shift) {
  if (num_labels < 2) throw Error(ErrorKind::InvalidArgument, "label space must have at least two labels");
  long s = shift % num_labels;
  if (s == 0) s = std::max(1L, std::lround(num_labels / 10.0)) % num_labels;
  long t = (static_cast<long>(top1) + s) % num_labels;
  if (t < 0) t += num_labels;
  return static_cast<Label>(t);
}

bool SuccessCriterion::holds(const Top5& t) const {
  if (mode == AttackMode::NonTargeted) return !t.contains(original_top1);
  for (int i = 0; i < kTopK; ++i) {
    if (t.labels[i] == target) return t.confidences[i] >= target_confidence;
  }
  return false;
}

SuccessCriterion criterion_for(const AttackConfig& cfg, const Top5& original, int num_labels) {
  SuccessCriterion c;
  c.mode = cfg.mode;
  c.original_top1 = original.top1();
  c.target_confidence = cfg.target_confidence;
  if (cfg.mode == AttackMode::Targeted) {
    c.target = shifted_target(original.top1(), num_labels, cfg.target_shift);
    if (c.target == c.original_top1) throw Error(ErrorKind::DegenerateTarget, "shifted target equals top-1");
  }
  return c;
}

PerturbationNorms perturbation_norms(const Image& original, const Image& perturbed) {
  const Eigen::ArrayXd d = perturbed.pixels() - original.pixels();
  return {d.abs().sum(), std::sqrt(d.square().sum()), d.size() ? d.abs().maxCoeff() : 0.0};
}

namespace {

Eigen::ArrayXd step_direction(AttackFamily family, const Eigen::ArrayXd& g) {
  switch (family) {
    case AttackFamily::FGSM:
    case AttackFamily::BIM:
    case AttackFamily::PGD:
      return g.sign();
    case AttackFamily::L1Iter: {
      // Scaled so that one unit step moves pixels by one unit on average.
      const double mean_abs = g.abs().mean();
      return mean_abs > 0.0 ? Eigen::ArrayXd(g / mean_abs) : Eigen::ArrayXd::Zero(g.size());
    }
    case AttackFamily::Gradient:
    case AttackFamily::L2Iter: {
      const double rms = std::sqrt(g.square().mean());
      return rms > 0.0 ? Eigen::ArrayXd(g / rms) : Eigen::ArrayXd::Zero(g.size());
    }
  }
  return Eigen::ArrayXd::Zero(g.size());
}

}  // namespace

AttackOutcome run_attack(const AttackConfig& cfg, const Classifier& backend, const Image& img) {
  validate(img);
  cfg.validate();
  const DeskModel* model = backend.gradient_model();
  if (!model) throw Error(ErrorKind::GradientUnavailable, "backend '" + backend.id() + "' exposes no gradients");

  AttackOutcome outcome;
  outcome.original_top5 = backend.classify_top5(img);
  outcome.final_top5 = outcome.original_top5;
  const SuccessCriterion criterion = criterion_for(cfg, outcome.original_top5, backend.num_labels());
  outcome.target = criterion.target;
  if (cfg.epsilon == 0.0) return outcome;

  const bool targeted = cfg.mode == AttackMode::Targeted;
  const Label loss_label = targeted ? criterion.target : criterion.original_top1;
  const double ascent = targeted ? -1.0 : 1.0;
  const bool single_step = cfg.family == AttackFamily::FGSM || cfg.family == AttackFamily::Gradient;
  const int iterations = single_step ? 1 : cfg.max_iterations;
  const double step = single_step ? cfg.epsilon : cfg.step_size;

  const Eigen::ArrayXd& x = img.pixels();
  const Eigen::ArrayXd lower = x - cfg.epsilon;
  const Eigen::ArrayXd upper = x + cfg.epsilon;
  Image adv = img;
  if (cfg.family == AttackFamily::PGD && cfg.random_start) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
    for (Eigen::Index i = 0; i < adv.size(); ++i) adv.pixels()[i] = std::clamp(x[i] + u(rng), 0.0, 1.0);
  }

  for (int t = 1; t <= iterations; ++t) {
    const auto fb = model->forward_backward(adv, loss_label);
    const Eigen::ArrayXd g = ascent * fb.gradient;
    Eigen::ArrayXd next = adv.pixels() + step * step_direction(cfg.family, g);
    next = next.max(lower).min(upper).max(0.0).min(1.0);
    adv.pixels() = std::move(next);
    outcome.iterations_used = t;
    outcome.final_top5 = backend.classify_top5(adv);
    if (criterion.holds(outcome.final_top5)) {
      outcome.success = true;
      break;
    }
  }
  outcome.norms = perturbation_norms(img, adv);
  if (outcome.success) outcome.adversarial = std::move(adv);
  return outcome;
}

bool verify_persisted(const AttackOutcome& outcome, const Classifier& backend, const SuccessCriterion& criterion) {
  if (!outcome.success || !outcome.adversarial) return false;
  const Image reloaded = jpeg_roundtrip_q100(*outcome.adversarial);
  return criterion.holds(backend.classify_top5(reloaded));
}

}  // namespace advdetect
