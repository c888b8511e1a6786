#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace a2v {

enum class ErrorCode {
  // audio_frontend
  NonDivisible,
  EmptyAudio,
  InvalidArgument,
  WeightsShapeMismatch,
  // generator / discriminators / losses
  ShapeMismatch,
  DimensionMismatch,
  ShortWindow,
  EmptyBatch,
  DegenerateEye,
  // curriculum
  InvalidPhase,
  MissingLandmarks,
  NonFiniteLoss,
  // few-shot
  ResolutionMismatch,
  UntrainedCheckpoint,
  // metrics
  TooSmall,
  NoEdges,
  LengthMismatch,
  TooShort,
  // data pipeline
  ManifestSyntax,
  FrameAudioMismatch,
  MissingFile,
  CountMismatch,
  VersionUnsupported,
  FingerprintMismatch,
  CorruptArchive,
  ConfigInvalid,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Validation failures map to CLI exit code 1, everything else to 2.
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace a2v
