#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "a2v/audio.hpp"
#include "a2v/image.hpp"

namespace a2v {

/// Sidecar written next to an assembled frame sequence (video.json).
struct VideoDescriptor {
  int fps = 25;
  int frame_count = 0;
  double duration_s = 0.0;
  std::string frames_dir;  // relative to the output directory
  std::string audio;       // relative to the output directory
};

/// Writes frames/NNNNNN.ppm, audio.wav and video.json under `out_dir`.
/// Throws CountMismatch unless the frame count equals round(duration * fps).
///
/// `mux_command`, when non-empty, runs through the shell after the files are
/// written, with {frames}, {audio}, {fps} and {out} substituted; a non-zero
/// exit status throws Io.
VideoDescriptor assemble_video(const std::vector<Image>& frames, const Waveform& audio, int fps,
                               const std::filesystem::path& out_dir, const std::string& mux_command = "");

VideoDescriptor read_video_descriptor(const std::filesystem::path& path);

}  // namespace a2v
