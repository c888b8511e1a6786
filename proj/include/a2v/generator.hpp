#pragma once

#include <vector>

#include <torch/torch.h>

#include "a2v/audio.hpp"
#include "a2v/config.hpp"
#include "a2v/encoder.hpp"

namespace a2v {

/// Identity image resized to every generator block resolution, coarse to fine
/// (4x4 up to the output resolution). Each level is [B, 3, r, r].
struct IdentityPyramid {
  std::vector<torch::Tensor> levels;

  const torch::Tensor& at_resolution(std::int64_t r) const;
};

/// image: [B, 3, H, W] in [-1, 1] with H == W == resolution.
IdentityPyramid build_pyramid(const torch::Tensor& image, int resolution);

/// out = norm(x) * (1 + gamma(cond)) + beta(cond). The gamma/beta convolutions
/// start at zero so a fresh block behaves like plain normalization.
class SpadeNormImpl : public torch::nn::Module {
 public:
  SpadeNormImpl(int channels, int hidden, NormKind norm);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cond);
  /// Parameter-free normalization only.
  torch::Tensor normalize(const torch::Tensor& x) const;

  int channels() const noexcept { return channels_; }

 private:
  int channels_;
  NormKind norm_;
  torch::nn::Conv2d shared_{nullptr};
  torch::nn::Conv2d gamma_{nullptr};
  torch::nn::Conv2d beta_{nullptr};
};
TORCH_MODULE(SpadeNorm);

/// Throws ShapeMismatch when cond and activations differ in spatial size.
torch::Tensor spade_normalize(const torch::Tensor& activations, const torch::Tensor& cond, SpadeNorm& params);

class SpadeResBlockImpl : public torch::nn::Module {
 public:
  SpadeResBlockImpl(int in_channels, int out_channels, int hidden, NormKind norm);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cond, bool plain_norm = false);

 private:
  bool learned_shortcut_;
  SpadeNorm norm0_{nullptr};
  SpadeNorm norm1_{nullptr};
  SpadeNorm norm_s_{nullptr};
  torch::nn::Conv2d conv0_{nullptr};
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Conv2d conv_s_{nullptr};
};
TORCH_MODULE(SpadeResBlock);

/// Audio embedding -> dense 4x4 seed -> SPADE residual blocks doubling the
/// resolution up to the configured size -> tanh RGB frame.
class SpadeGeneratorImpl : public torch::nn::Module {
 public:
  explicit SpadeGeneratorImpl(const Config& cfg);

  /// mfcc: [B, T, n_mfcc], identity: [B, 3, R, R] -> [B, 3, R, R] in [-1, 1].
  torch::Tensor forward(const torch::Tensor& mfcc, const torch::Tensor& identity);

  /// Same as forward() but starting from content embeddings [B, audio_dim].
  /// With plain_norm the SPADE modulation is bypassed.
  torch::Tensor from_embedding(const torch::Tensor& embedding, const IdentityPyramid& pyramid,
                               bool plain_norm = false);

  ContentEncoder& encoder() noexcept { return encoder_; }
  int resolution() const noexcept { return resolution_; }
  int audio_dim() const noexcept { return audio_dim_; }

  /// Parameters of the SPADE modulation branches only.
  std::vector<torch::Tensor> modulation_parameters() const;

 private:
  int resolution_;
  int audio_dim_;
  int base_channels_;
  ContentEncoder encoder_{nullptr};
  torch::nn::Linear fc_{nullptr};
  SpadeResBlock head_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(SpadeGenerator);

/// One generated frame, [3, R, R] in [-1, 1].
struct GeneratedFrame {
  torch::Tensor pixels;
  int frame_index = 0;
};

/// Single-frame inference. Throws DimensionMismatch on a wrong embedding size.
GeneratedFrame generate_frame(const ContentEmbedding& audio, const torch::Tensor& identity,
                              SpadeGenerator& generator);

/// Generates one frame per audio window of `w`; clips of any length.
std::vector<GeneratedFrame> generate_video(const Waveform& w, const torch::Tensor& identity,
                                           SpadeGenerator& generator, const AudioConfig& audio_cfg,
                                           int batch_size = 16);

/// Stack of per-window MFCC matrices, [N, rows, cols].
torch::Tensor stack_mfcc(const std::vector<AudioWindow>& windows);

}  // namespace a2v
