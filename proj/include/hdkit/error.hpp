#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdkit {

enum class ErrorCode {
  InvalidInput,
  DegenerateConfiguration,
  AntipodalRotation,
  OutOfStroke,
  LoopClosureInfeasible,
  TargetUnreachable,
  NonMonotonicStroke,
  InsufficientFrames,
  NonRigidSequence,
  AmbiguousAssignment,
  MissingFrameMarker,
  EmptyOverlap,
  NonMonotonicTimestamps,
  TimelineMismatch,
  ChecksumMismatch,
  DuplicateEpisode,
  DimensionMismatch,
  NotNormalized,
  NonPositiveTemperature,
  UnknownStage,
  FrameOutOfRange,
  ParseError,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::AntipodalRotation: return "AntipodalRotation";
    case ErrorCode::OutOfStroke: return "OutOfStroke";
    case ErrorCode::LoopClosureInfeasible: return "LoopClosureInfeasible";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::NonMonotonicStroke: return "NonMonotonicStroke";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::NonRigidSequence: return "NonRigidSequence";
    case ErrorCode::AmbiguousAssignment: return "AmbiguousAssignment";
    case ErrorCode::MissingFrameMarker: return "MissingFrameMarker";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::TimelineMismatch: return "TimelineMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::DuplicateEpisode: return "DuplicateEpisode";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::UnknownStage: return "UnknownStage";
    case ErrorCode::FrameOutOfRange: return "FrameOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a stable error code. Every recoverable failure in the
/// library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hdkit
