#include "a2v/losses.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "a2v/checkpoint.hpp"
#include "a2v/error.hpp"

namespace a2v {

namespace F = torch::nn::functional;
namespace nn = torch::nn;

torch::Tensor gan_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake, GanSide side) {
  auto bce = [](const torch::Tensor& logits, double target) {
    return F::binary_cross_entropy_with_logits(logits, torch::full_like(logits, target));
  };
  torch::Tensor total;
  auto add = [&](const torch::Tensor& t) { total = total.defined() ? total + t : t; };
  if (side == GanSide::Discriminator) {
    if (real.scores.size() != fake.scores.size()) {
      throw Error(ErrorCode::ShapeMismatch, "real and fake outputs have different scale counts");
    }
    for (std::size_t k = 0; k < real.scores.size(); ++k) {
      add(bce(real.scores[k], 1.0) + bce(fake.scores[k], 0.0));
    }
  } else {
    for (const auto& score : fake.scores) add(bce(score, 1.0));
  }
  if (!total.defined()) throw Error(ErrorCode::EmptyBatch, "discriminator output has no scales");
  return total;
}

torch::Tensor reconstruction_loss(const torch::Tensor& real, const torch::Tensor& gen) {
  if (real.sizes() != gen.sizes() || real.dim() < 2) {
    throw Error(ErrorCode::ShapeMismatch, "reconstruction loss needs equally shaped frames");
  }
  const auto h = real.size(-2);
  return (real.slice(-2, h / 2) - gen.slice(-2, h / 2)).abs().mean();
}

torch::Tensor feature_matching_loss(const std::vector<std::vector<torch::Tensor>>& real,
                                    const std::vector<std::vector<torch::Tensor>>& fake) {
  if (real.size() != fake.size()) throw Error(ErrorCode::ShapeMismatch, "scale count differs");
  torch::Tensor total;
  for (std::size_t k = 0; k < real.size(); ++k) {
    if (real[k].size() != fake[k].size()) throw Error(ErrorCode::ShapeMismatch, "layer count differs");
    for (std::size_t i = 0; i < real[k].size(); ++i) {
      if (real[k][i].sizes() != fake[k][i].sizes()) throw Error(ErrorCode::ShapeMismatch, "layer shape differs");
      auto term = (real[k][i] - fake[k][i]).abs().mean();
      total = total.defined() ? total + term : term;
    }
  }
  return total.defined() ? total : torch::zeros({});
}

FeatureExtractorImpl::FeatureExtractorImpl(int channels, std::uint64_t seed) {
  levels_ = register_module("levels", nn::ModuleList());
  levels_->push_back(nn::Conv2d(nn::Conv2dOptions(3, channels, 3).padding(1)));
  levels_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, 2 * channels, 4).stride(2).padding(1)));
  levels_->push_back(nn::Conv2d(nn::Conv2dOptions(2 * channels, 4 * channels, 4).stride(2).padding(1)));
  levels_->push_back(nn::Conv2d(nn::Conv2dOptions(4 * channels, 4 * channels, 4).stride(2).padding(1)));

  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  for (auto& p : named_parameters(true)) {
    auto& t = p.value();
    if (p.key().ends_with("weight")) {
      const double fan_in = static_cast<double>(t.numel() / t.size(0));
      t.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
    } else {
      t.zero_();
    }
    t.set_requires_grad(false);
  }
}

std::vector<torch::Tensor> FeatureExtractorImpl::forward(const torch::Tensor& image) {
  std::vector<torch::Tensor> out;
  auto h = image;
  for (const auto& level : *levels_) {
    h = torch::relu(level->as<nn::Conv2dImpl>()->forward(h));
    out.push_back(h);
  }
  return out;
}

void FeatureExtractorImpl::load_weights(const std::filesystem::path& path) {
  import_module(*this, "", load_tensor_file(path));
  for (auto& p : parameters(true)) p.set_requires_grad(false);
}

FeatureExtractor make_extractor(const LossConfig& cfg) {
  FeatureExtractor fx(cfg.extractor_channels, cfg.extractor_seed);
  if (!cfg.extractor_weights.empty()) fx->load_weights(cfg.extractor_weights);
  fx->eval();
  return fx;
}

torch::Tensor perceptual_loss(const torch::Tensor& real, const torch::Tensor& gen, FeatureExtractor& extractor,
                              double weight) {
  if (real.sizes() != gen.sizes()) throw Error(ErrorCode::ShapeMismatch, "perceptual loss needs equal shapes");
  std::vector<torch::Tensor> real_feats;
  {
    torch::NoGradGuard no_grad;
    real_feats = extractor->forward(real);
  }
  const auto gen_feats = extractor->forward(gen);
  torch::Tensor total = torch::zeros({}, gen.options());
  for (std::size_t i = 0; i < gen_feats.size(); ++i) total = total + (real_feats[i] - gen_feats[i]).abs().mean();
  return weight * total;
}

torch::Tensor contrastive_loss_from_distances(const torch::Tensor& d, const torch::Tensor& y, double margin) {
  if (d.numel() == 0) throw Error(ErrorCode::EmptyBatch, "contrastive loss over zero pairs");
  if (d.sizes() != y.sizes()) throw Error(ErrorCode::ShapeMismatch, "distance and label counts differ");
  const auto n = static_cast<double>(d.numel());
  auto yf = y.to(d.scalar_type());
  auto hinge = torch::clamp_min(margin - d, 0.0);
  return (yf * d.pow(2) + (1 - yf) * hinge.pow(2)).sum() / (2.0 * n);
}

torch::Tensor contrastive_loss(const torch::Tensor& v, const torch::Tensor& a, const torch::Tensor& y,
                               double margin) {
  if (v.size(0) == 0) throw Error(ErrorCode::EmptyBatch, "contrastive loss over zero pairs");
  if (v.sizes() != a.sizes()) throw Error(ErrorCode::ShapeMismatch, "video and audio embeddings differ in shape");
  return contrastive_loss_from_distances(sync_distance(v, a), y, margin);
}

torch::Tensor ear_tensor(const torch::Tensor& landmarks) {
  if (landmarks.dim() != 3 || landmarks.size(1) != 12 || landmarks.size(2) != 2) {
    throw Error(ErrorCode::ShapeMismatch, "landmarks must be [B, 12, 2]");
  }
  auto norm = [](const torch::Tensor& a, const torch::Tensor& b) {
    return (a - b).pow(2).sum(-1).clamp_min(1e-12).sqrt();
  };
  auto one_eye = [&](int o) {
    auto p = [&](int i) { return landmarks.select(1, o + i - 1); };
    return (norm(p(2), p(6)) + norm(p(3), p(5))) / norm(p(1), p(4)).clamp_min(1e-6);
  };
  return 0.5 * (one_eye(0) + one_eye(6));
}

torch::Tensor blink_loss(const torch::Tensor& real_ear, const torch::Tensor& gen_ear) {
  return (real_ear - gen_ear).abs().mean();
}

LandmarkRegressorImpl::LandmarkRegressorImpl(int resolution, int channels) : resolution_(resolution) {
  const int c = channels;
  body_ = register_module(
      "body",
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(5, c, 3).padding(1)), nn::ReLU(),
                     nn::Conv2d(nn::Conv2dOptions(c, 2 * c, 4).stride(2).padding(1)), nn::ReLU(),
                     nn::Conv2d(nn::Conv2dOptions(2 * c, 2 * c, 3).padding(2).dilation(2)), nn::ReLU(),
                     nn::Conv2d(nn::Conv2dOptions(2 * c, 2 * c, 3).padding(4).dilation(4)), nn::ReLU()));
  heatmaps_ = register_module("heatmaps", nn::Conv2d(nn::Conv2dOptions(2 * c, kPoints, 1)));
}

torch::Tensor LandmarkRegressorImpl::forward(const torch::Tensor& frames) {
  const auto b = frames.size(0);
  const auto r = frames.size(-1);
  auto coords = torch::linspace(-1.0, 1.0, r, frames.options());
  auto gy = coords.view({1, 1, r, 1}).expand({b, 1, r, r});
  auto gx = coords.view({1, 1, 1, r}).expand({b, 1, r, r});
  auto h = heatmaps_->forward(body_->forward(torch::cat({frames, gx, gy}, 1)));  // [B, 12, r/2, r/2]
  const auto side = h.size(-1);
  auto prob = torch::softmax(h.flatten(2), -1).view({b, kPoints, side, side});
  const double cell = static_cast<double>(r) / side;
  auto centers = torch::arange(side, frames.options()) * cell + (cell - 1.0) / 2.0;
  auto x = (prob.sum(2) * centers).sum(-1);
  auto y = (prob.sum(3) * centers).sum(-1);
  return torch::stack({x, y}, -1);
}

}  // namespace a2v
