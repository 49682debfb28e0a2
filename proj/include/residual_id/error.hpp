// residual_id/error.hpp

// Copyright 2026 The residual-id Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace residual_id {

enum class ErrorCode {
  MalformedHeader,
  UnsupportedFormat,
  EmptyAudio,
  IoFailure,
  InvalidArgument,
  ClipTooShort,
  LagTooLarge,
  ZeroEnergy,
  NumericalBreakdown,
  MemoryLengthMismatch,
  NegativeFrequency,
  InvalidBand,
  FrameLongerThanFft,
  AllFramesRejected,
  DimensionMismatch,
  TooFewFrames,
  EmptyFeatures,
  IndivisibleComponents,
  ImpossibleObservation,
  InsufficientTrainingData,
  EmptyModelSet,
  ClipShorterThanRequested,
  FingerprintMismatch,
  UnknownFormatVersion,
  CorruptModel,
  ProfileSpaceExhausted,
  ConfigParseError,
};

const char *error_code_name(ErrorCode code);

/// Every failure surfaced by the library is an Error carrying a code that
/// callers (and the CLI's error record) can switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const { return code_; }
  const std::string &detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &message) {
  throw Error(code, message);
}

}  // namespace residual_id
