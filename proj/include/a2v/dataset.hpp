#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "a2v/audio.hpp"
#include "a2v/config.hpp"
#include "a2v/eye.hpp"
#include "a2v/image.hpp"
#include "a2v/manifest.hpp"

namespace a2v {

/// A clip held in memory, frames aligned one-to-one with audio windows.
struct ClipData {
  std::string clip_id;
  torch::Tensor frames;     // uint8 [N, 3, R, R]
  torch::Tensor mfcc;       // float [N, rows, n_mfcc]
  torch::Tensor landmarks;  // float [N, 12, 2], undefined when absent
  int identity_frame = 0;

  std::int64_t size() const { return frames.size(0); }
  bool has_landmarks() const { return landmarks.defined(); }
};

/// RGB image -> float [3, H, W] in [-1, 1].
torch::Tensor image_to_tensor(const Image& img);
/// float [3, H, W] in [-1, 1] -> RGB image (rounded, clamped).
Image tensor_to_image(const torch::Tensor& t);
/// uint8 [.., 3, H, W] -> float in [-1, 1].
torch::Tensor to_unit_range(const torch::Tensor& frames_u8);

torch::Tensor landmarks_tensor(const std::vector<EyeLandmarks>& rows);

/// Throws ResolutionMismatch when a frame is not R x R. Frames beyond the
/// audio window count (or windows beyond the frame count) are dropped.
ClipData make_clip_data(const std::string& clip_id, const std::vector<Image>& frames, const Waveform& audio,
                        const std::optional<std::vector<EyeLandmarks>>& landmarks, int identity_frame,
                        const Config& cfg);

/// Loads every valid entry of a manifest report.
std::vector<ClipData> load_dataset(const ManifestReport& report, const Config& cfg);

}  // namespace a2v
