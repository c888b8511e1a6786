#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "a2v/error.hpp"
#include "a2v/eye.hpp"

namespace a2v {

/// One line of a JSON Lines manifest. Relative paths resolve against the
/// manifest's directory.
struct ClipManifestEntry {
  std::string clip_id;
  std::filesystem::path frames_path;
  std::filesystem::path audio_path;
  int fps = 25;
  std::optional<std::filesystem::path> landmarks_path;
  int identity_frame = 0;
  bool aligned = true;
  int frame_count = 0;  // filled during validation
};

struct ManifestIssue {
  int line = 0;
  std::string clip_id;
  ErrorCode code;
  std::string message;
};

struct ManifestReport {
  std::vector<ClipManifestEntry> entries;  // valid entries only
  std::vector<ManifestIssue> issues;
};

/// Parses and validates every entry. Throws ManifestSyntax when the file or a
/// line does not parse; per-entry problems land in `issues`.
ManifestReport load_manifest(const std::filesystem::path& path);

void write_manifest(const std::vector<ClipManifestEntry>& entries, const std::filesystem::path& path);

/// Landmark file: one line per frame, 24 numbers (12 points as x y pairs).
std::vector<EyeLandmarks> read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::vector<EyeLandmarks>& rows, const std::filesystem::path& path);

}  // namespace a2v
