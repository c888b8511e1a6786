#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "a2v/audio.hpp"
#include "a2v/eye.hpp"
#include "a2v/image.hpp"

namespace a2v {

struct SyntheticOptions {
  int resolution = 64;
  double duration_s = 2.0;
  int sample_rate = 16000;
  int fps = 25;
};

/// Geometry and colors of one procedural face, in 64-pixel units.
struct FaceIdentity {
  std::uint8_t background[3];
  std::uint8_t skin[3];
  std::uint8_t hair[3];
  std::uint8_t lips[3];
  double face_rx, face_ry, face_cy;
  double eye_y, eye_sep, eye_half_width, eye_half_height;
  double mouth_y, mouth_half_width;
};

struct SyntheticClip {
  std::string clip_id;
  FaceIdentity identity;
  Waveform audio;
  std::vector<Image> frames;
  std::vector<EyeLandmarks> landmarks;
  std::vector<double> mouth_height;  // rendered mouth opening, pixels
  std::vector<double> rms;           // per-frame audio RMS
  std::vector<bool> blinking;
};

/// RMS of each frame's stride-long audio cell [k*stride, (k+1)*stride).
std::vector<double> frame_rms(const Waveform& w, int fps);

/// Draws one face; `mouth_open` and `eye_open` lie in [0, 1].
Image render_face(const FaceIdentity& id, double mouth_open, double eye_open, int resolution,
                  EyeLandmarks* landmarks = nullptr, double* mouth_height = nullptr);

FaceIdentity random_identity(std::uint64_t seed);

/// Deterministic in (seed, index). The mouth opening follows the per-frame
/// audio RMS of a syllabic multi-tone signal; eyes blink at random intervals.
SyntheticClip render_synthetic_clip(std::uint64_t seed, int index, const SyntheticOptions& opts = {});

/// Writes `n_clips` clips (frames, audio.wav, landmarks.txt, meta.json) plus
/// manifest.jsonl under `out_dir`; returns the manifest path.
std::filesystem::path make_synthetic_corpus(int n_clips, std::uint64_t seed, const std::filesystem::path& out_dir,
                                            const SyntheticOptions& opts = {});

}  // namespace a2v
