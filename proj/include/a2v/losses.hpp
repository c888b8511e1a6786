#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "a2v/config.hpp"
#include "a2v/discriminators.hpp"
#include "a2v/eye.hpp"

namespace a2v {

enum class GanSide { Generator, Discriminator };

/// Binary cross-entropy on sigmoid(score): mean over patches, summed over
/// scales. The discriminator side minimizes -[log D(x) + log(1 - D(G(z)))],
/// the generator side -log D(G(z)) (`real` is ignored there).
torch::Tensor gan_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake, GanSide side);

/// Mean |real - gen| over the lower half (rows >= H/2) of [.., H, W] frames.
torch::Tensor reconstruction_loss(const torch::Tensor& real, const torch::Tensor& gen);

/// Sum over scales and layers of mean |real - fake| per layer.
torch::Tensor feature_matching_loss(const std::vector<std::vector<torch::Tensor>>& real,
                                    const std::vector<std::vector<torch::Tensor>>& fake);

/// Frozen convolutional feature pyramid used by the perceptual loss and the
/// default identity embedder. Randomly initialized from a fixed seed unless
/// weights are loaded.
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  static constexpr int kLevels = 4;

  FeatureExtractorImpl(int channels, std::uint64_t seed);

  std::vector<torch::Tensor> forward(const torch::Tensor& image);
  void load_weights(const std::filesystem::path& path);

 private:
  torch::nn::ModuleList levels_{nullptr};
};
TORCH_MODULE(FeatureExtractor);

FeatureExtractor make_extractor(const LossConfig& cfg);

/// weight * sum over extractor layers of mean |F(real) - F(gen)|. Gradients
/// reach `gen` only.
torch::Tensor perceptual_loss(const torch::Tensor& real, const torch::Tensor& gen, FeatureExtractor& extractor,
                              double weight);

/// (1 / 2N) sum y d^2 + (1 - y) max(margin - d, 0)^2. Throws EmptyBatch.
torch::Tensor contrastive_loss_from_distances(const torch::Tensor& d, const torch::Tensor& y, double margin);
torch::Tensor contrastive_loss(const torch::Tensor& v, const torch::Tensor& a, const torch::Tensor& y,
                               double margin);

/// Differentiable EAR for landmarks [B, 12, 2] (left eye then right eye);
/// returns the per-sample mean of both eyes, [B].
torch::Tensor ear_tensor(const torch::Tensor& landmarks);

torch::Tensor blink_loss(const torch::Tensor& real_ear, const torch::Tensor& gen_ear);

/// Small heatmap network predicting the 12 eye landmarks of a frame through a
/// spatial soft-argmax, in pixel coordinates.
class LandmarkRegressorImpl : public torch::nn::Module {
 public:
  static constexpr int kPoints = 12;

  LandmarkRegressorImpl(int resolution, int channels = 32);

  /// [B, 3, R, R] -> [B, 12, 2] (x, y).
  torch::Tensor forward(const torch::Tensor& frames);

 private:
  int resolution_;
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d heatmaps_{nullptr};
};
TORCH_MODULE(LandmarkRegressor);

}  // namespace a2v
