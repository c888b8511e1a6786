#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "a2v/audio.hpp"
#include "a2v/config.hpp"

namespace a2v {

/// Content features for one audio window.
struct ContentEmbedding {
  std::vector<float> vector;
  int frame_index = 0;
};

/// Stand-in for a pretrained speech front end: two temporal convolutions over
/// the MFCC frames followed by a bidirectional GRU and a dense projection.
/// Weights exported from an external model can be loaded with load_weights().
class ContentEncoderImpl : public torch::nn::Module {
 public:
  ContentEncoderImpl(const AudioConfig& cfg, int audio_dim, bool zero_init_head = false);

  /// mfcc: [B, T, n_mfcc] raw coefficients -> [B, audio_dim].
  torch::Tensor forward(const torch::Tensor& mfcc);

  /// Throws WeightsShapeMismatch when the archive does not fit this layout.
  void load_weights(const std::filesystem::path& path);

  int audio_dim() const noexcept { return audio_dim_; }
  int n_mfcc() const noexcept { return n_mfcc_; }

 private:
  int n_mfcc_;
  int audio_dim_;
  double feature_scale_;
  torch::nn::Conv1d conv1_{nullptr};
  torch::nn::Conv1d conv2_{nullptr};
  torch::nn::GRU gru_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ContentEncoder);

/// [rows, cols] float tensor holding the coefficients of `mfcc`.
torch::Tensor mfcc_tensor(const Mfcc& mfcc);

/// Throws DimensionMismatch when the matrix width differs from the encoder's.
ContentEmbedding encode_content(const Mfcc& mfcc, ContentEncoder& encoder, int frame_index = 0);

}  // namespace a2v
