#include "a2v/dataset.hpp"

#include <cstring>

#include "a2v/error.hpp"
#include "a2v/wav.hpp"

namespace a2v {

torch::Tensor image_to_tensor(const Image& img) {
  if (img.channels != 3) throw Error(ErrorCode::ShapeMismatch, "expected an RGB image");
  auto t = torch::from_blob(const_cast<std::uint8_t*>(img.pixels.data()), {img.height, img.width, 3}, torch::kUInt8);
  return to_unit_range(t.permute({2, 0, 1}).contiguous());
}

Image tensor_to_image(const torch::Tensor& t) {
  if (t.dim() != 3 || t.size(0) != 3) throw Error(ErrorCode::ShapeMismatch, "expected a [3, H, W] tensor");
  auto u8 = ((t.detach().to(torch::kFloat) + 1.0) * 127.5).round().clamp(0, 255).to(torch::kUInt8);
  auto hwc = u8.permute({1, 2, 0}).contiguous();
  Image img(static_cast<int>(t.size(2)), static_cast<int>(t.size(1)), 3);
  std::memcpy(img.pixels.data(), hwc.data_ptr<std::uint8_t>(), img.pixels.size());
  return img;
}

torch::Tensor to_unit_range(const torch::Tensor& frames_u8) {
  return frames_u8.to(torch::kFloat) / 127.5 - 1.0;
}

torch::Tensor landmarks_tensor(const std::vector<EyeLandmarks>& rows) {
  auto t = torch::empty({static_cast<std::int64_t>(rows.size()), 12, 2});
  auto a = t.accessor<float, 3>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int p = 0; p < 6; ++p) {
      a[i][p][0] = static_cast<float>(rows[i].left[p].x);
      a[i][p][1] = static_cast<float>(rows[i].left[p].y);
      a[i][p + 6][0] = static_cast<float>(rows[i].right[p].x);
      a[i][p + 6][1] = static_cast<float>(rows[i].right[p].y);
    }
  }
  return t;
}

ClipData make_clip_data(const std::string& clip_id, const std::vector<Image>& frames, const Waveform& audio,
                        const std::optional<std::vector<EyeLandmarks>>& landmarks, int identity_frame,
                        const Config& cfg) {
  const int r = cfg.gen.resolution;
  const auto windows = extract_windows(audio, cfg.audio);
  std::int64_t n = std::min<std::int64_t>(static_cast<std::int64_t>(frames.size()),
                                          static_cast<std::int64_t>(windows.size()));
  if (landmarks) n = std::min<std::int64_t>(n, static_cast<std::int64_t>(landmarks->size()));
  if (n == 0) throw Error(ErrorCode::EmptyAudio, clip_id + ": no frames");

  ClipData clip;
  clip.clip_id = clip_id;
  clip.identity_frame = identity_frame;
  clip.frames = torch::empty({n, 3, r, r}, torch::kUInt8);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& img = frames[static_cast<std::size_t>(i)];
    if (img.width != r || img.height != r || img.channels != 3) {
      throw Error(ErrorCode::ResolutionMismatch, clip_id + ": frame " + std::to_string(i) + " is " +
                                                     std::to_string(img.width) + "x" + std::to_string(img.height) +
                                                     ", expected " + std::to_string(r) + "x" + std::to_string(r));
    }
    auto hwc = torch::from_blob(const_cast<std::uint8_t*>(img.pixels.data()), {r, r, 3}, torch::kUInt8);
    clip.frames[i].copy_(hwc.permute({2, 0, 1}));
  }
  std::vector<AudioWindow> used(windows.begin(), windows.begin() + n);
  std::vector<torch::Tensor> rows;
  for (const auto& w : used) rows.push_back(torch::from_blob(const_cast<float*>(w.mfcc.values.data()),
                                                             {w.mfcc.rows, w.mfcc.cols}, torch::kFloat));
  clip.mfcc = torch::stack(rows).clone();
  if (landmarks) {
    std::vector<EyeLandmarks> rows_lm(landmarks->begin(), landmarks->begin() + n);
    clip.landmarks = landmarks_tensor(rows_lm);
  }
  if (identity_frame < 0 || identity_frame >= n) {
    throw Error(ErrorCode::InvalidArgument, clip_id + ": identity frame out of range");
  }
  return clip;
}

std::vector<ClipData> load_dataset(const ManifestReport& report, const Config& cfg) {
  std::vector<ClipData> out;
  out.reserve(report.entries.size());
  for (const auto& e : report.entries) {
    std::vector<Image> frames;
    for (const auto& f : list_frames(e.frames_path)) frames.push_back(read_pnm(f));
    const Waveform audio = read_wav(e.audio_path);
    std::optional<std::vector<EyeLandmarks>> lm;
    if (e.landmarks_path) lm = read_landmarks(*e.landmarks_path);
    out.push_back(make_clip_data(e.clip_id, frames, audio, lm, e.identity_frame, cfg));
  }
  return out;
}

}  // namespace a2v
