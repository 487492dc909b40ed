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

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "advdetect/classifier.hpp"
#include "advdetect/image.hpp"
#include "advdetect/top5.hpp"

namespace advdetect {

enum class AttackFamily { FGSM, Gradient, BIM, PGD, L1Iter, L2Iter };
enum class AttackMode { Targeted, NonTargeted };

std::string to_string(AttackFamily family);
std::string to_string(AttackMode mode);
AttackFamily parse_attack_family(const std::string& text);
AttackMode parse_attack_mode(const std::string& text);

struct AttackConfig {
  AttackFamily family = AttackFamily::BIM;
  AttackMode mode = AttackMode::NonTargeted;
  double epsilon = 8.0 / 255.0;
  double step_size = 1.0 / 255.0;
  int max_iterations = 40;
  double target_confidence = 0.99;
  /// Label shift for targeted mode; 100 as in the 1000-class setting.
  int target_shift = 100;
  bool random_start = false;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on a budget outside the documented ranges.
  /// epsilon == 0 is accepted and yields an unsuccessful outcome.
  void validate() const;
  nlohmann::json to_json() const;
  static AttackConfig from_json(const nlohmann::json& j);
  /// Short family/mode tag such as "bim" or "pgd-t".
  std::string tag() const;
};

/// Parses "family[:mode]" with optional overrides, e.g. "bim", "pgd:targeted".
AttackConfig parse_attack_spec(const std::string& text, const AttackConfig& defaults);

struct PerturbationNorms {
  double l1 = 0;
  double l2 = 0;
  double linf = 0;
};

struct AttackOutcome {
  bool success = false;
  std::optional<Image> adversarial;
  int iterations_used = 0;
  Top5 original_top5;
  Top5 final_top5;
  Label target = -1;
  PerturbationNorms norms;
};

/// (top1 + shift) mod K. When shift is a multiple of K the rule would map
/// every label onto itself, so max(1, round(K/10)) is used instead.
Label shifted_target(Label top1, int num_labels, int shift);

/// What must hold on a top-5 for an attack to count as successful.
struct SuccessCriterion {
  AttackMode mode = AttackMode::NonTargeted;
  Label original_top1 = 0;
  Label target = -1;
  double target_confidence = 0.99;

  bool holds(const Top5& t) const;
};

SuccessCriterion criterion_for(const AttackConfig& cfg, const Top5& original, int num_labels);

/// Runs one gradient attack against the backend's differentiable model.
/// Targeted mode descends the loss of the shifted target; non-targeted mode
/// ascends the loss of the original top-1. Stops at the first success.
AttackOutcome run_attack(const AttackConfig& cfg, const Classifier& backend, const Image& img);

/// Persists the adversarial image as JPEG-100, reloads it, re-classifies,
/// and reports whether the criterion still holds.
bool verify_persisted(const AttackOutcome& outcome, const Classifier& backend, const SuccessCriterion& criterion);

PerturbationNorms perturbation_norms(const Image& original, const Image& perturbed);

}  // namespace advdetect
