// src/error.cpp

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

#include "residual_id/error.hpp"

namespace residual_id {

const char *error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::EmptyAudio: return "EmptyAudio";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ClipTooShort: return "ClipTooShort";
    case ErrorCode::LagTooLarge: return "LagTooLarge";
    case ErrorCode::ZeroEnergy: return "ZeroEnergy";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::MemoryLengthMismatch: return "MemoryLengthMismatch";
    case ErrorCode::NegativeFrequency: return "NegativeFrequency";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::FrameLongerThanFft: return "FrameLongerThanFft";
    case ErrorCode::AllFramesRejected: return "AllFramesRejected";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::EmptyFeatures: return "EmptyFeatures";
    case ErrorCode::IndivisibleComponents: return "IndivisibleComponents";
    case ErrorCode::ImpossibleObservation: return "ImpossibleObservation";
    case ErrorCode::InsufficientTrainingData: return "InsufficientTrainingData";
    case ErrorCode::EmptyModelSet: return "EmptyModelSet";
    case ErrorCode::ClipShorterThanRequested: return "ClipShorterThanRequested";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::UnknownFormatVersion: return "UnknownFormatVersion";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::ProfileSpaceExhausted: return "ProfileSpaceExhausted";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
  }
  return "Unknown";
}

}  // namespace residual_id
