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

#include <stdexcept>
#include <string>
#include <string_view>

namespace advdetect {

/// Error classes raised across the toolkit. The CLI maps each class to an
/// exit status (see `exit_code`).
enum class ErrorKind {
  InvalidArgument,
  InvalidImage,
  EncodingFailure,
  DegenerateOutput,
  BackendUnavailable,
  ProtocolViolation,
  LabelSpaceTooSmall,
  NonFiniteLoss,
  GradientUnavailable,
  DegenerateTarget,
  ClassMissing,
  SingularCovariance,
  FeatureMismatch,
  EmptySplit,
  InsufficientCorrectImages,
  RatioInfeasible,
  MetadataMissing,
  VerificationFailed,
  MissingInput,
  FormatError,
  VersionMismatch,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit status for an error class: 2 missing input, 3 validation,
/// 4 backend failure.
int exit_code(ErrorKind kind) noexcept;

}  // namespace advdetect
