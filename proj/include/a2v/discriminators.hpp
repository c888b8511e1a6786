#pragma once

#include <vector>

#include <torch/torch.h>

#include "a2v/config.hpp"

namespace a2v {

/// Per-scale patch logits plus the intermediate activations that produced them.
/// Index 0 is the full-resolution scale; each following scale halves the side.
struct DiscriminatorOutput {
  std::vector<torch::Tensor> scores;
  std::vector<std::vector<torch::Tensor>> features;  // [scale][layer], shallow to deep
};

/// Images downsampled by factors 1, 2, 4, ... (2x2 average pooling per step).
std::vector<torch::Tensor> scale_pyramid(const torch::Tensor& image, int levels);

/// Four-layer PatchGAN-style network: three stride-2 4x4 convolutions, one
/// stride-1 3x3 convolution, then a 3x3 score head. All but the first
/// convolution are followed by instance normalization.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  static constexpr int kFeatureLayers = 4;

  PatchDiscriminatorImpl(int in_channels, int channels);

  /// Returns the score map and appends the four activations to `features`.
  torch::Tensor forward(const torch::Tensor& x, std::vector<torch::Tensor>& features);

 private:
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::Conv2d score_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// Identical patch discriminators applied to successive scales of the input.
class MultiScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  MultiScaleDiscriminatorImpl(int in_channels, int channels, int scales);

  DiscriminatorOutput forward(const torch::Tensor& x);
  int scales() const noexcept { return static_cast<int>(nets_->size()); }

 private:
  torch::nn::ModuleList nets_{nullptr};
};
TORCH_MODULE(MultiScaleDiscriminator);

/// Three-scale frame discriminator conditioned on the identity image through
/// channel concatenation.
class FrameDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit FrameDiscriminatorImpl(const Config& cfg);

  /// frame, identity: [B, 3, R, R]. Throws ShapeMismatch.
  DiscriminatorOutput forward(const torch::Tensor& frame, const torch::Tensor& identity);

 private:
  int resolution_;
  MultiScaleDiscriminator net_{nullptr};
};
TORCH_MODULE(FrameDiscriminator);

/// Two-scale discriminator over the channel-stacked frames of a window.
class TemporalDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit TemporalDiscriminatorImpl(const Config& cfg);

  /// frames: [B, L', 3, R, R]; the last L frames are scored. Throws
  /// ShortWindow when L' < L.
  DiscriminatorOutput forward(const torch::Tensor& frames);
  int length() const noexcept { return length_; }

 private:
  int length_;
  int resolution_;
  MultiScaleDiscriminator net_{nullptr};
};
TORCH_MODULE(TemporalDiscriminator);

/// Two-stream synchronization network producing unit-norm embeddings.
class SyncDiscriminatorImpl : public torch::nn::Module {
 public:
  static constexpr int kFrames = 5;

  explicit SyncDiscriminatorImpl(const Config& cfg);

  /// frames: [B, >=5, 3, R, R]; the last five frames' lower halves are
  /// resized to the sync resolution. Throws ShortWindow.
  torch::Tensor embed_video(const torch::Tensor& frames);
  /// mfcc: [B, 20, n_mfcc] raw coefficients. Throws ShapeMismatch.
  torch::Tensor embed_audio(const torch::Tensor& mfcc);

  /// [B, 15, S, S] lower-half crops as fed to the video stream.
  torch::Tensor video_input(const torch::Tensor& frames) const;

 private:
  int sync_resolution_;
  int mfcc_rows_;
  int n_mfcc_;
  double feature_scale_;
  torch::nn::Sequential video_{nullptr};
  torch::nn::Linear video_fc_{nullptr};
  torch::nn::Sequential audio_{nullptr};
  torch::nn::Linear audio_fc_{nullptr};
};
TORCH_MODULE(SyncDiscriminator);

/// d_n = ||v - a||_2 per row.
torch::Tensor sync_distance(const torch::Tensor& v, const torch::Tensor& a);

}  // namespace a2v
