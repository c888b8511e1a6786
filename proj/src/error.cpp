#include "a2v/error.hpp"

namespace a2v {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonDivisible: return "NonDivisible";
    case ErrorCode::EmptyAudio: return "EmptyAudio";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::WeightsShapeMismatch: return "WeightsShapeMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShortWindow: return "ShortWindow";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DegenerateEye: return "DegenerateEye";
    case ErrorCode::InvalidPhase: return "InvalidPhase";
    case ErrorCode::MissingLandmarks: return "MissingLandmarks";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::UntrainedCheckpoint: return "UntrainedCheckpoint";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::NoEdges: return "NoEdges";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ManifestSyntax: return "ManifestSyntax";
    case ErrorCode::FrameAudioMismatch: return "FrameAudioMismatch";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::CorruptArchive: return "CorruptArchive";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::ManifestSyntax:
    case ErrorCode::FrameAudioMismatch:
    case ErrorCode::MissingFile:
    case ErrorCode::CountMismatch:
    case ErrorCode::ConfigInvalid:
    case ErrorCode::NonDivisible:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ResolutionMismatch:
    case ErrorCode::UntrainedCheckpoint:
    case ErrorCode::FingerprintMismatch:
    case ErrorCode::VersionUnsupported:
    case ErrorCode::LengthMismatch:
      return true;
    default:
      return false;
  }
}

}  // namespace a2v
