#include "a2v/encoder.hpp"

#include "a2v/checkpoint.hpp"
#include "a2v/error.hpp"

namespace a2v {

namespace F = torch::nn::functional;

ContentEncoderImpl::ContentEncoderImpl(const AudioConfig& cfg, int audio_dim, bool zero_init_head)
    : n_mfcc_(cfg.n_mfcc), audio_dim_(audio_dim), feature_scale_(cfg.feature_scale) {
  const int ch = cfg.encoder_channels;
  conv1_ = register_module("conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(n_mfcc_, ch, 3).padding(1)));
  conv2_ = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(ch, ch, 3).padding(1)));
  gru_ = register_module(
      "gru", torch::nn::GRU(torch::nn::GRUOptions(ch, cfg.encoder_hidden).batch_first(true).bidirectional(true)));
  head_ = register_module("head", torch::nn::Linear(2 * cfg.encoder_hidden, audio_dim));
  if (zero_init_head) {
    torch::NoGradGuard no_grad;
    head_->weight.zero_();
    head_->bias.zero_();
  }
}

torch::Tensor ContentEncoderImpl::forward(const torch::Tensor& mfcc) {
  if (mfcc.dim() != 3 || mfcc.size(2) != n_mfcc_) {
    throw Error(ErrorCode::DimensionMismatch, "encoder expects [B, T, " + std::to_string(n_mfcc_) + "] input");
  }
  auto x = (mfcc * feature_scale_).transpose(1, 2);  // [B, C, T]
  x = F::leaky_relu(conv1_->forward(x), F::LeakyReLUFuncOptions().negative_slope(0.2));
  x = F::leaky_relu(conv2_->forward(x), F::LeakyReLUFuncOptions().negative_slope(0.2));
  auto [seq, h_n] = gru_->forward(x.transpose(1, 2));  // h_n: [2, B, H]
  auto last = torch::cat({h_n[0], h_n[1]}, 1);
  return head_->forward(last);
}

void ContentEncoderImpl::load_weights(const std::filesystem::path& path) {
  import_module(*this, "", load_tensor_file(path));
}

torch::Tensor mfcc_tensor(const Mfcc& mfcc) {
  return torch::from_blob(const_cast<float*>(mfcc.values.data()), {mfcc.rows, mfcc.cols}, torch::kFloat32)
      .clone();
}

ContentEmbedding encode_content(const Mfcc& mfcc, ContentEncoder& encoder, int frame_index) {
  if (mfcc.cols != encoder->n_mfcc()) {
    throw Error(ErrorCode::DimensionMismatch, "MFCC width " + std::to_string(mfcc.cols));
  }
  torch::NoGradGuard no_grad;
  auto out = encoder->forward(mfcc_tensor(mfcc).unsqueeze(0)).squeeze(0).contiguous();
  ContentEmbedding emb;
  emb.frame_index = frame_index;
  emb.vector.assign(out.data_ptr<float>(), out.data_ptr<float>() + out.numel());
  return emb;
}

}  // namespace a2v
