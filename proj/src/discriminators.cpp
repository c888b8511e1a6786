#include "a2v/discriminators.hpp"

#include "a2v/error.hpp"

namespace a2v {

namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace {

nn::LeakyReLU lrelu() { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); }

}  // namespace

std::vector<torch::Tensor> scale_pyramid(const torch::Tensor& image, int levels) {
  std::vector<torch::Tensor> out{image};
  for (int i = 1; i < levels; ++i) out.push_back(F::avg_pool2d(out.back(), F::AvgPool2dFuncOptions(2)));
  return out;
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in_channels, int channels) {
  layers_ = register_module("layers", nn::ModuleList());
  int in = in_channels;
  // Every convolution after the first is instance-normalized, which keeps the
  // feature scale matched by the feature-matching loss from drifting upward.
  for (int i = 0; i < 3; ++i) {
    const int out = channels << i;
    nn::Sequential block(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    if (i > 0) block->push_back(nn::InstanceNorm2d(out));
    block->push_back(lrelu());
    layers_->push_back(block);
    in = out;
  }
  layers_->push_back(
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, in, 3).padding(1)), nn::InstanceNorm2d(in), lrelu()));
  score_ = register_module("score", nn::Conv2d(nn::Conv2dOptions(in, 1, 3).padding(1)));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x, std::vector<torch::Tensor>& features) {
  auto h = x;
  for (const auto& layer : *layers_) {
    h = layer->as<nn::SequentialImpl>()->forward(h);
    features.push_back(h);
  }
  return score_->forward(h);
}

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(int in_channels, int channels, int scales) {
  nets_ = register_module("scales", nn::ModuleList());
  for (int i = 0; i < scales; ++i) nets_->push_back(PatchDiscriminator(in_channels, channels));
}

DiscriminatorOutput MultiScaleDiscriminatorImpl::forward(const torch::Tensor& x) {
  const auto inputs = scale_pyramid(x, scales());
  DiscriminatorOutput out;
  out.features.resize(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out.scores.push_back(nets_[i]->as<PatchDiscriminatorImpl>()->forward(inputs[i], out.features[i]));
  }
  return out;
}

FrameDiscriminatorImpl::FrameDiscriminatorImpl(const Config& cfg) : resolution_(cfg.gen.resolution) {
  net_ = register_module("net", MultiScaleDiscriminator(6, cfg.disc.frame_channels, 3));
}

DiscriminatorOutput FrameDiscriminatorImpl::forward(const torch::Tensor& frame, const torch::Tensor& identity) {
  auto ok = [&](const torch::Tensor& t) {
    return t.dim() == 4 && t.size(1) == 3 && t.size(2) == resolution_ && t.size(3) == resolution_;
  };
  if (!ok(frame) || !ok(identity)) {
    throw Error(ErrorCode::ShapeMismatch, "frame discriminator expects [B, 3, " + std::to_string(resolution_) +
                                              ", " + std::to_string(resolution_) + "] inputs");
  }
  auto id = identity.size(0) == frame.size(0) ? identity : identity.expand({frame.size(0), -1, -1, -1});
  return net_->forward(torch::cat({frame, id}, 1));
}

TemporalDiscriminatorImpl::TemporalDiscriminatorImpl(const Config& cfg)
    : length_(cfg.disc.temporal_length), resolution_(cfg.gen.resolution) {
  net_ = register_module("net", MultiScaleDiscriminator(3 * length_, cfg.disc.temporal_channels, 2));
}

DiscriminatorOutput TemporalDiscriminatorImpl::forward(const torch::Tensor& frames) {
  if (frames.dim() != 5 || frames.size(2) != 3 || frames.size(3) != resolution_ || frames.size(4) != resolution_) {
    throw Error(ErrorCode::ShapeMismatch, "temporal discriminator expects [B, L, 3, R, R]");
  }
  if (frames.size(1) < length_) {
    throw Error(ErrorCode::ShortWindow, std::to_string(frames.size(1)) + " frames, window needs " +
                                            std::to_string(length_));
  }
  auto window = frames.slice(1, frames.size(1) - length_);
  return net_->forward(window.reshape({frames.size(0), 3 * length_, resolution_, resolution_}));
}

SyncDiscriminatorImpl::SyncDiscriminatorImpl(const Config& cfg)
    : sync_resolution_(cfg.disc.sync_resolution),
      mfcc_rows_(cfg.audio.window_ms / cfg.audio.hop_ms),
      n_mfcc_(cfg.audio.n_mfcc),
      feature_scale_(cfg.audio.feature_scale) {
  const int c = cfg.disc.sync_channels;
  video_ = register_module(
      "video",
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3 * kFrames, c, 4).stride(2).padding(1)), lrelu(),
                     nn::Conv2d(nn::Conv2dOptions(c, 2 * c, 4).stride(2).padding(1)), lrelu(),
                     nn::Conv2d(nn::Conv2dOptions(2 * c, 4 * c, 4).stride(2).padding(1)), lrelu(),
                     nn::Conv2d(nn::Conv2dOptions(4 * c, 4 * c, 4).stride(2).padding(1)), lrelu()));
  const int side = sync_resolution_ / 16;
  video_fc_ = register_module("video_fc", nn::Linear(4 * c * side * side, cfg.disc.sync_dim));

  audio_ = register_module(
      "audio", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(1, c, 3).padding(1)), lrelu(),
                              nn::Conv2d(nn::Conv2dOptions(c, 2 * c, 3).stride(2).padding(1)), lrelu(),
                              nn::Conv2d(nn::Conv2dOptions(2 * c, 4 * c, 3).stride(2).padding(1)), lrelu(),
                              nn::Conv2d(nn::Conv2dOptions(4 * c, 4 * c, 3).padding(1)), lrelu()));
  auto out_side = [](int v) { return ((v + 1) / 2 + 1) / 2; };
  audio_fc_ = register_module("audio_fc",
                              nn::Linear(4 * c * out_side(mfcc_rows_) * out_side(n_mfcc_), cfg.disc.sync_dim));
}

torch::Tensor SyncDiscriminatorImpl::video_input(const torch::Tensor& frames) const {
  if (frames.dim() != 5 || frames.size(2) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "sync video stream expects [B, 5, 3, H, W]");
  }
  if (frames.size(1) < kFrames) throw Error(ErrorCode::ShortWindow, "sync window needs 5 frames");
  const auto b = frames.size(0);
  const auto h = frames.size(3);
  auto lower = frames.slice(1, frames.size(1) - kFrames).slice(3, h / 2);  // rows [H/2, H)
  auto flat = lower.reshape({b * kFrames, 3, lower.size(3), lower.size(4)});
  auto resized = F::interpolate(flat, F::InterpolateFuncOptions()
                                          .size(std::vector<int64_t>{sync_resolution_, sync_resolution_})
                                          .mode(torch::kBilinear)
                                          .align_corners(false));
  return resized.reshape({b, 3 * kFrames, sync_resolution_, sync_resolution_});
}

torch::Tensor SyncDiscriminatorImpl::embed_video(const torch::Tensor& frames) {
  auto h = video_->forward(video_input(frames));
  return F::normalize(video_fc_->forward(h.flatten(1)), F::NormalizeFuncOptions().p(2).dim(1));
}

torch::Tensor SyncDiscriminatorImpl::embed_audio(const torch::Tensor& mfcc) {
  if (mfcc.dim() != 3 || mfcc.size(1) != mfcc_rows_ || mfcc.size(2) != n_mfcc_) {
    throw Error(ErrorCode::ShapeMismatch, "sync audio stream expects [B, " + std::to_string(mfcc_rows_) + ", " +
                                              std::to_string(n_mfcc_) + "] MFCC");
  }
  auto h = audio_->forward((mfcc * feature_scale_).unsqueeze(1));
  return F::normalize(audio_fc_->forward(h.flatten(1)), F::NormalizeFuncOptions().p(2).dim(1));
}

torch::Tensor sync_distance(const torch::Tensor& v, const torch::Tensor& a) {
  return torch::linalg_vector_norm(v - a, 2, {1}, false, c10::nullopt);
}

}  // namespace a2v
