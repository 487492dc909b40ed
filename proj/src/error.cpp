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

#include "advdetect/error.hpp"

namespace advdetect {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidImage: return "InvalidImage";
    case ErrorKind::EncodingFailure: return "EncodingFailure";
    case ErrorKind::DegenerateOutput: return "DegenerateOutput";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::LabelSpaceTooSmall: return "LabelSpaceTooSmall";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::GradientUnavailable: return "GradientUnavailable";
    case ErrorKind::DegenerateTarget: return "DegenerateTarget";
    case ErrorKind::ClassMissing: return "ClassMissing";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::FeatureMismatch: return "FeatureMismatch";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::InsufficientCorrectImages: return "InsufficientCorrectImages";
    case ErrorKind::RatioInfeasible: return "RatioInfeasible";
    case ErrorKind::MetadataMissing: return "MetadataMissing";
    case ErrorKind::VerificationFailed: return "VerificationFailed";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingInput:
      return 2;
    case ErrorKind::BackendUnavailable:
    case ErrorKind::ProtocolViolation:
    case ErrorKind::LabelSpaceTooSmall:
    case ErrorKind::GradientUnavailable:
      return 4;
    default:
      return 3;
  }
}

}  // namespace advdetect
