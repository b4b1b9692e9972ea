// Copyright 2026 The qndsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
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

namespace qnd {

enum class ErrorCode {
  InvalidMatrix,
  NotHermitian,
  NotPositive,
  ZeroTrace,
  NotProjectorFamily,
  InvalidAlphabet,
  NotNormalized,
  DegenerateFacts,
  ZeroAmplitude,
  UnknownOutcome,
  NonCommuting,
  NoFixedPoint,
  NoReference,
  AssumptionViolated,
  PerturbationTooLarge,
  DominanceViolated,
  InvalidConfig,
  WeightUnderflow,
  TooLarge,
  BadWindow,
  DegenerateD,
  NeighborhoodsOverlap,
  NoStates,
  FactsUnidentifiable,
  InsufficientResolvedCycles,
  ParseError,
  InvariantFailure,
  Usage,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPositive: return "NotPositive";
    case ErrorCode::ZeroTrace: return "ZeroTrace";
    case ErrorCode::NotProjectorFamily: return "NotProjectorFamily";
    case ErrorCode::InvalidAlphabet: return "InvalidAlphabet";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::DegenerateFacts: return "DegenerateFacts";
    case ErrorCode::ZeroAmplitude: return "ZeroAmplitude";
    case ErrorCode::UnknownOutcome: return "UnknownOutcome";
    case ErrorCode::NonCommuting: return "NonCommuting";
    case ErrorCode::NoFixedPoint: return "NoFixedPoint";
    case ErrorCode::NoReference: return "NoReference";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::PerturbationTooLarge: return "PerturbationTooLarge";
    case ErrorCode::DominanceViolated: return "DominanceViolated";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::WeightUnderflow: return "WeightUnderflow";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::DegenerateD: return "DegenerateD";
    case ErrorCode::NeighborhoodsOverlap: return "NeighborhoodsOverlap";
    case ErrorCode::NoStates: return "NoStates";
    case ErrorCode::FactsUnidentifiable: return "FactsUnidentifiable";
    case ErrorCode::InsufficientResolvedCycles: return "InsufficientResolvedCycles";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantFailure: return "InvariantFailure";
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qnd
