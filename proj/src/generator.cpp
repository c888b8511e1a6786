#include "a2v/generator.hpp"

#include <algorithm>

#include "a2v/error.hpp"

namespace a2v {

namespace F = torch::nn::functional;

namespace {

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

torch::nn::Conv2d conv3x3(int in, int out, bool bias = true) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).bias(bias));
}

int log2_exact(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return k;
}

}  // namespace

const torch::Tensor& IdentityPyramid::at_resolution(std::int64_t r) const {
  for (const auto& level : levels) {
    if (level.size(-1) == r) return level;
  }
  throw Error(ErrorCode::ShapeMismatch, "no pyramid level at resolution " + std::to_string(r));
}

IdentityPyramid build_pyramid(const torch::Tensor& image, int resolution) {
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != resolution || image.size(3) != resolution) {
    throw Error(ErrorCode::ShapeMismatch,
                "identity image must be [B, 3, " + std::to_string(resolution) + ", " +
                    std::to_string(resolution) + "]");
  }
  IdentityPyramid p;
  for (int r = 4; r < resolution; r *= 2) {
    p.levels.push_back(F::interpolate(
        image, F::InterpolateFuncOptions().size(std::vector<int64_t>{r, r}).mode(torch::kArea)));
  }
  p.levels.push_back(image);
  return p;
}

SpadeNormImpl::SpadeNormImpl(int channels, int hidden, NormKind norm) : channels_(channels), norm_(norm) {
  shared_ = register_module("shared", conv3x3(3, hidden));
  gamma_ = register_module("gamma", conv3x3(hidden, channels));
  beta_ = register_module("beta", conv3x3(hidden, channels));
  torch::NoGradGuard no_grad;
  for (auto* conv : {&gamma_, &beta_}) {
    (*conv)->weight.zero_();
    (*conv)->bias.zero_();
  }
}

torch::Tensor SpadeNormImpl::normalize(const torch::Tensor& x) const {
  constexpr double kEps = 1e-5;
  const std::vector<int64_t> dims = norm_ == NormKind::Batch ? std::vector<int64_t>{0, 2, 3}
                                                             : std::vector<int64_t>{2, 3};
  auto mean = x.mean(dims, /*keepdim=*/true);
  auto centered = x - mean;
  auto var = (centered * centered).mean(dims, /*keepdim=*/true);
  return centered / torch::sqrt(var + kEps);
}

torch::Tensor SpadeNormImpl::forward(const torch::Tensor& x, const torch::Tensor& cond) {
  auto actv = torch::relu(shared_->forward(cond));
  return normalize(x) * (1 + gamma_->forward(actv)) + beta_->forward(actv);
}

torch::Tensor spade_normalize(const torch::Tensor& activations, const torch::Tensor& cond, SpadeNorm& params) {
  const bool batched = activations.dim() == 4;
  auto x = batched ? activations : activations.unsqueeze(0);
  auto c = cond.dim() == 4 ? cond : cond.unsqueeze(0);
  if (x.dim() != 4 || c.dim() != 4 || x.size(2) != c.size(2) || x.size(3) != c.size(3)) {
    throw Error(ErrorCode::ShapeMismatch, "conditioning resolution differs from activations");
  }
  if (x.size(1) != params->channels()) {
    throw Error(ErrorCode::ShapeMismatch, "activation channels differ from modulation channels");
  }
  auto out = params->forward(x, c);
  return batched ? out : out.squeeze(0);
}

SpadeResBlockImpl::SpadeResBlockImpl(int in_channels, int out_channels, int hidden, NormKind norm)
    : learned_shortcut_(in_channels != out_channels) {
  const int mid = std::min(in_channels, out_channels);
  norm0_ = register_module("norm0", SpadeNorm(in_channels, hidden, norm));
  conv0_ = register_module("conv0", conv3x3(in_channels, mid));
  norm1_ = register_module("norm1", SpadeNorm(mid, hidden, norm));
  conv1_ = register_module("conv1", conv3x3(mid, out_channels));
  if (learned_shortcut_) {
    norm_s_ = register_module("norm_s", SpadeNorm(in_channels, hidden, norm));
    conv_s_ = register_module(
        "conv_s", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).bias(false)));
  }
}

torch::Tensor SpadeResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& cond, bool plain_norm) {
  auto norm = [&](SpadeNorm& n, const torch::Tensor& v) { return plain_norm ? n->normalize(v) : n->forward(v, cond); };
  auto shortcut = learned_shortcut_ ? conv_s_->forward(norm(norm_s_, x)) : x;
  auto dx = conv0_->forward(lrelu(norm(norm0_, x)));
  dx = conv1_->forward(lrelu(norm(norm1_, dx)));
  return shortcut + dx;
}

SpadeGeneratorImpl::SpadeGeneratorImpl(const Config& cfg)
    : resolution_(cfg.gen.resolution), audio_dim_(cfg.gen.audio_dim), base_channels_(cfg.gen.base_channels) {
  encoder_ = register_module("encoder", ContentEncoder(cfg.audio, audio_dim_));
  fc_ = register_module("fc", torch::nn::Linear(audio_dim_, 16 * base_channels_));
  const int hidden = cfg.gen.spade_hidden;
  head_ = register_module("head", SpadeResBlock(base_channels_, base_channels_, hidden, cfg.gen.norm));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  const int n_up = log2_exact(resolution_ / 4);
  int in = base_channels_;
  for (int i = 1; i <= n_up; ++i) {
    const int out = std::max(base_channels_ >> i, cfg.gen.min_channels);
    blocks_->push_back(SpadeResBlock(in, out, hidden, cfg.gen.norm));
    in = out;
  }
  out_conv_ = register_module("out", conv3x3(in, 3));
}

torch::Tensor SpadeGeneratorImpl::forward(const torch::Tensor& mfcc, const torch::Tensor& identity) {
  return from_embedding(encoder_->forward(mfcc), build_pyramid(identity, resolution_));
}

torch::Tensor SpadeGeneratorImpl::from_embedding(const torch::Tensor& embedding, const IdentityPyramid& pyramid,
                                                 bool plain_norm) {
  if (embedding.dim() != 2 || embedding.size(1) != audio_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "content embedding must be [B, " + std::to_string(audio_dim_) + "]");
  }
  const auto batch = embedding.size(0);
  auto x = fc_->forward(embedding).view({batch, base_channels_, 4, 4});
  auto cond_at = [&](std::int64_t r) {
    const auto& level = pyramid.at_resolution(r);
    return level.size(0) == batch ? level : level.expand({batch, -1, -1, -1});
  };
  x = head_->forward(x, cond_at(4), plain_norm);
  for (const auto& module : *blocks_) {
    x = F::interpolate(x, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
    x = module->as<SpadeResBlockImpl>()->forward(x, cond_at(x.size(-1)), plain_norm);
  }
  return torch::tanh(out_conv_->forward(lrelu(x)));
}

std::vector<torch::Tensor> SpadeGeneratorImpl::modulation_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& item : named_parameters(true)) {
    const auto& key = item.key();
    if (key.find(".shared.") != std::string::npos || key.find(".gamma.") != std::string::npos ||
        key.find(".beta.") != std::string::npos) {
      out.push_back(item.value());
    }
  }
  return out;
}

GeneratedFrame generate_frame(const ContentEmbedding& audio, const torch::Tensor& identity,
                              SpadeGenerator& generator) {
  if (static_cast<int>(audio.vector.size()) != generator->audio_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "embedding has " + std::to_string(audio.vector.size()) +
                                                  " entries, generator expects " +
                                                  std::to_string(generator->audio_dim()));
  }
  torch::NoGradGuard no_grad;
  auto emb = torch::tensor(audio.vector).unsqueeze(0);
  auto img = identity.dim() == 3 ? identity.unsqueeze(0) : identity;
  auto out = generator->from_embedding(emb, build_pyramid(img, generator->resolution()));
  return {out.squeeze(0), audio.frame_index};
}

torch::Tensor stack_mfcc(const std::vector<AudioWindow>& windows) {
  std::vector<torch::Tensor> rows;
  rows.reserve(windows.size());
  for (const auto& w : windows) rows.push_back(mfcc_tensor(w.mfcc));
  return torch::stack(rows);
}

std::vector<GeneratedFrame> generate_video(const Waveform& w, const torch::Tensor& identity,
                                           SpadeGenerator& generator, const AudioConfig& audio_cfg,
                                           int batch_size) {
  const auto windows = extract_windows(w, audio_cfg);
  const auto mfcc = stack_mfcc(windows);
  auto img = identity.dim() == 3 ? identity.unsqueeze(0) : identity;
  torch::NoGradGuard no_grad;
  const auto pyramid = build_pyramid(img, generator->resolution());
  std::vector<GeneratedFrame> frames;
  frames.reserve(windows.size());
  const auto n = static_cast<int64_t>(windows.size());
  for (int64_t start = 0; start < n; start += batch_size) {
    const auto end = std::min<int64_t>(n, start + batch_size);
    auto emb = generator->encoder()->forward(mfcc.slice(0, start, end));
    auto out = generator->from_embedding(emb, pyramid);
    for (int64_t i = 0; i < end - start; ++i) {
      frames.push_back({out[i].clone(), static_cast<int>(start + i)});
    }
  }
  return frames;
}

}  // namespace a2v
