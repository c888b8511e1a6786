#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "a2v/eye.hpp"
#include "a2v/losses.hpp"
#include "oracles/grad_check.hpp"
#include "test_util.hpp"

using namespace a2v;
using a2v::testing::error_code_of;
using a2v::testing::tiny_config;

namespace {

// Score maps whose sigmoid is p everywhere.
DiscriminatorOutput constant_output(double p, int scales = 3) {
  DiscriminatorOutput out;
  const double logit = p <= 0 ? -1e4 : p >= 1 ? 1e4 : std::log(p / (1 - p));
  for (int s = 0; s < scales; ++s) out.scores.push_back(torch::full({2, 1, 4 >> s, 4 >> s}, logit));
  return out;
}

EyePoints eye_from(std::array<double, 12> xy) {
  EyePoints e;
  for (int i = 0; i < 6; ++i) e[i] = {xy[2 * i], xy[2 * i + 1]};
  return e;
}

}  // namespace

TEST(GanLoss, WorkedExamples) {
  EXPECT_NEAR(gan_loss(constant_output(1.0), constant_output(0.0), GanSide::Discriminator).item<double>(), 0.0, 1e-9);
  const auto half = gan_loss(constant_output(0.5, 1), constant_output(0.5, 1), GanSide::Discriminator);
  EXPECT_NEAR(half.item<double>(), 2 * std::numbers::ln2, 1e-6);
  // summed over scales
  const auto half3 = gan_loss(constant_output(0.5), constant_output(0.5), GanSide::Discriminator);
  EXPECT_NEAR(half3.item<double>(), 3 * 2 * std::numbers::ln2, 1e-5);
  EXPECT_NEAR(gan_loss({}, constant_output(1.0), GanSide::Generator).item<double>(), 0.0, 1e-9);
  EXPECT_NEAR(gan_loss({}, constant_output(0.25, 1), GanSide::Generator).item<double>(), -std::log(0.25), 1e-6);
}

TEST(GanLoss, MatchesHandBce) {
  torch::manual_seed(1);
  DiscriminatorOutput real, fake;
  real.scores = {torch::randn({1, 1, 3, 3})};
  fake.scores = {torch::randn({1, 1, 3, 3})};
  double expect = 0.0;
  for (int i = 0; i < 9; ++i) {
    const double r = real.scores[0].view({-1})[i].item<double>();
    const double f = fake.scores[0].view({-1})[i].item<double>();
    expect += -std::log(1 / (1 + std::exp(-r))) - std::log(1 - 1 / (1 + std::exp(-f)));
  }
  EXPECT_NEAR(gan_loss(real, fake, GanSide::Discriminator).item<double>(), expect / 9, 1e-5);
}

TEST(ReconstructionLoss, LowerHalfOnly) {
  auto real = torch::zeros({3, 8, 8});
  EXPECT_EQ(reconstruction_loss(real, real).item<double>(), 0.0);
  auto gen = real.clone();
  gen.slice(1, 4).fill_(0.5);
  gen.slice(1, 0, 4).fill_(1.0);
  EXPECT_NEAR(reconstruction_loss(real, gen).item<double>(), 0.5, 1e-7);
  EXPECT_EQ(error_code_of([&] { reconstruction_loss(real, torch::zeros({3, 8, 4})); }), ErrorCode::ShapeMismatch);
}

TEST(ReconstructionLoss, BruteForceAndUpperHalfIndependence) {
  torch::manual_seed(2);
  auto a = torch::rand({2, 3, 9, 6}, torch::kDouble), b = torch::rand({2, 3, 9, 6}, torch::kDouble);
  double sum = 0.0;
  int n = 0;
  auto pa = a.accessor<double, 4>(), pb = b.accessor<double, 4>();
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 4; y < 9; ++y)  // H/2 = 4 for H = 9
        for (int x = 0; x < 6; ++x, ++n) sum += std::abs(pa[i][c][y][x] - pb[i][c][y][x]);
  EXPECT_NEAR(reconstruction_loss(a, b).item<double>(), sum / n, 1e-12);
  auto c = b.clone();
  c.slice(2, 0, 4).uniform_(-5, 5);
  EXPECT_EQ(reconstruction_loss(a, b).item<double>(), reconstruction_loss(a, c).item<double>());
}

TEST(FeatureMatchingLoss, WorkedExamples) {
  std::vector<std::vector<torch::Tensor>> one_real{{torch::zeros({1})}}, one_fake{{torch::full({1}, 2.0)}};
  EXPECT_NEAR(feature_matching_loss(one_real, one_fake).item<double>(), 2.0, 1e-7);
  EXPECT_EQ(feature_matching_loss(one_real, one_real).item<double>(), 0.0);
  std::vector<std::vector<torch::Tensor>> real{{torch::zeros({4}), torch::zeros({2})}};
  std::vector<std::vector<torch::Tensor>> fake{{torch::ones({4}), torch::full({2}, 3.0)}};
  EXPECT_NEAR(feature_matching_loss(real, fake).item<double>(), 4.0, 1e-7);
  std::vector<std::vector<torch::Tensor>> bad{{torch::ones({3}), torch::full({2}, 3.0)}};
  EXPECT_EQ(error_code_of([&] { feature_matching_loss(real, bad); }), ErrorCode::ShapeMismatch);
}

TEST(PerceptualLoss, HandEvaluatedLayers) {
  LossConfig lc;
  lc.extractor_channels = 4;
  auto fx = make_extractor(lc);
  torch::manual_seed(3);
  auto real = torch::rand({1, 3, 16, 16}) * 2 - 1;
  auto gen = real + 0.25;
  EXPECT_EQ(perceptual_loss(real, real, fx, 10.0).item<double>(), 0.0);
  EXPECT_EQ(perceptual_loss(real, gen, fx, 0.0).item<double>(), 0.0);

  // convolutions by hand through the extractor's parameters
  auto params = fx->named_parameters();
  auto hr = real.to(torch::kDouble), hg = gen.to(torch::kDouble);
  double expect = 0.0;
  const int strides[] = {1, 2, 2, 2};
  for (int l = 0; l < 4; ++l) {
    auto w = params["levels." + std::to_string(l) + ".weight"].to(torch::kDouble);
    auto bias = params["levels." + std::to_string(l) + ".bias"].to(torch::kDouble);
    auto conv = [&](const torch::Tensor& x) {
      auto o = torch::conv2d(x, w, bias, strides[l], 1);
      return torch::relu(o);
    };
    hr = conv(hr);
    hg = conv(hg);
    expect += (hr - hg).abs().sum().item<double>() / static_cast<double>(hr.numel());
  }
  EXPECT_NEAR(perceptual_loss(real, gen, fx, 10.0).item<double>(), 10.0 * expect, 1e-4 * 10.0 * expect);
}

TEST(PerceptualLoss, ExtractorIsFrozenAndGradientReachesGenOnly) {
  auto fx = make_extractor(LossConfig{});
  for (const auto& p : fx->parameters()) EXPECT_FALSE(p.requires_grad());
  auto real = torch::rand({1, 3, 16, 16}).set_requires_grad(true);
  auto gen = torch::rand({1, 3, 16, 16}).set_requires_grad(true);
  perceptual_loss(real, gen, fx, 1.0).backward();
  EXPECT_FALSE(real.grad().defined());
  EXPECT_TRUE(gen.grad().defined());
}

TEST(ContrastiveLoss, WorkedExamples) {
  auto d = [](std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kDouble); };
  EXPECT_EQ(contrastive_loss_from_distances(d({0.0}), d({1.0}), 1.0).item<double>(), 0.0);
  EXPECT_EQ(contrastive_loss_from_distances(d({1.3}), d({0.0}), 1.0).item<double>(), 0.0);
  EXPECT_NEAR(contrastive_loss_from_distances(d({0.5, 0.4}), d({1.0, 0.0}), 1.0).item<double>(), 0.1525, 1e-12);
  EXPECT_EQ(error_code_of([&] { contrastive_loss_from_distances(torch::zeros({0}), torch::zeros({0}), 1.0); }),
            ErrorCode::EmptyBatch);
}

TEST(ContrastiveLoss, Monotonicity) {
  double prev_pos = -1.0, prev_neg = 1e9;
  for (double dist = 0.0; dist < 1.0; dist += 0.05) {
    const double pos = contrastive_loss_from_distances(torch::tensor({dist}), torch::tensor({1.0}), 1.0).item<double>();
    const double neg = contrastive_loss_from_distances(torch::tensor({dist}), torch::tensor({0.0}), 1.0).item<double>();
    EXPECT_GE(pos, prev_pos);
    EXPECT_LE(neg, prev_neg);
    EXPECT_GE(pos, 0.0);
    prev_pos = pos;
    prev_neg = neg;
  }
}

TEST(ContrastiveLoss, FromEmbeddings) {
  auto v = torch::tensor({{1.0, 0.0}, {0.0, 1.0}}, torch::kDouble);
  auto a = torch::tensor({{1.0, 0.0}, {1.0, 0.0}}, torch::kDouble);
  // d = {0, sqrt 2}; y = {1, 0}; hinge inactive for the negative
  EXPECT_NEAR(contrastive_loss(v, a, torch::tensor({1.0, 0.0}), 1.0).item<double>(), 0.0, 1e-9);
  EXPECT_NEAR(contrastive_loss(v, a, torch::tensor({0.0, 1.0}), 1.0).item<double>(), (1.0 + 2.0) / 4.0, 1e-9);
}

TEST(Ear, WorkedExamples) {
  EXPECT_DOUBLE_EQ(ear(eye_from({0, 0, 1, 1, 3, 1, 4, 0, 3, -1, 1, -1})), 1.0);
  EXPECT_DOUBLE_EQ(ear(eye_from({0, 0, 1, 0, 3, 0, 4, 0, 3, 0, 1, 0})), 0.0);
  EXPECT_NEAR(ear(eye_from({0, 0, 1, 2, 4, 1, 6, 0, 4, -1, 1, -1})), 5.0 / 6.0, 1e-12);
  EXPECT_EQ(error_code_of([] { ear(eye_from({2, 2, 1, 1, 3, 1, 2, 2, 3, -1, 1, -1})); }), ErrorCode::DegenerateEye);
}

TEST(Ear, SimilarityInvariance) {
  const EyePoints base = eye_from({0, 0, 1, 2, 4, 1, 6, 0, 4, -1, 1, -1});
  const double m = ear(base);
  for (double theta : {0.3, 1.7, -2.2}) {
    for (double scale : {0.5, 3.0}) {
      EyePoints t;
      for (int i = 0; i < 6; ++i) {
        const auto& p = base[i];
        t[i] = {scale * (std::cos(theta) * p.x - std::sin(theta) * p.y) + 7.5,
                scale * (std::sin(theta) * p.x + std::cos(theta) * p.y) - 2.25};
      }
      EXPECT_NEAR(ear(t), m, 1e-9);
    }
  }
}

TEST(Ear, TensorMatchesScalar) {
  torch::manual_seed(5);
  auto lm = torch::rand({3, 12, 2}, torch::kDouble) * 20;
  auto t = ear_tensor(lm);
  for (int b = 0; b < 3; ++b) {
    EyeLandmarks eyes;
    for (int i = 0; i < 6; ++i) {
      eyes.left[i] = {lm[b][i][0].item<double>(), lm[b][i][1].item<double>()};
      eyes.right[i] = {lm[b][6 + i][0].item<double>(), lm[b][6 + i][1].item<double>()};
    }
    EXPECT_NEAR(t[b].item<double>(), mean_ear(eyes), 1e-9);
  }
}

TEST(BlinkLoss, WorkedExamplesAndRotation) {
  EXPECT_EQ(blink_loss(0.3, 0.3), 0.0);
  EXPECT_NEAR(blink_loss(0.30, 0.25), 0.05, 1e-12);
  torch::manual_seed(6);
  auto real = torch::rand({2, 12, 2}, torch::kDouble) * 10;
  auto gen = torch::rand({2, 12, 2}, torch::kDouble) * 10;
  const double theta = 0.7;
  auto rot = torch::tensor({{std::cos(theta), std::sin(theta)}, {-std::sin(theta), std::cos(theta)}}, torch::kDouble);
  const double before = blink_loss(ear_tensor(real), ear_tensor(gen)).item<double>();
  const double after = blink_loss(ear_tensor(real.matmul(rot)), ear_tensor(gen.matmul(rot))).item<double>();
  EXPECT_NEAR(before, after, 1e-9);
}

TEST(Losses, FiniteDifferenceGradients) {
  torch::manual_seed(7);
  auto target = torch::rand({1, 3, 8, 8}, torch::kDouble);
  auto fx = make_extractor(LossConfig{});
  fx->to(torch::kDouble);
  auto real_lm = torch::rand({2, 12, 2}, torch::kDouble) * 10;
  for (unsigned seed : {1u, 2u}) {
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& g) { return reconstruction_loss(target, g); },
                                 torch::rand({1, 3, 8, 8}), seed).worst_rel, 1e-3);
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& g) { return perceptual_loss(target, g, fx, 10.0); },
                                 torch::rand({1, 3, 8, 8}), seed).worst_rel, 1e-3);
    EXPECT_LT(oracle::grad_check(
                  [&](const torch::Tensor& s) {
                    DiscriminatorOutput o;
                    o.scores = {s};
                    return gan_loss(o, o, GanSide::Discriminator) + gan_loss({}, o, GanSide::Generator);
                  },
                  torch::randn({1, 1, 4, 4}), seed).worst_rel, 1e-3);
    EXPECT_LT(oracle::grad_check(
                  [&](const torch::Tensor& f) {
                    std::vector<std::vector<torch::Tensor>> real{{target}}, fake{{f}};
                    return feature_matching_loss(real, fake);
                  },
                  torch::rand({1, 3, 8, 8}), seed).worst_rel, 1e-3);
    EXPECT_LT(oracle::grad_check(
                  [&](const torch::Tensor& v) {
                    auto a = torch::eye(4, torch::kDouble);
                    return contrastive_loss(v, a, torch::tensor({1.0, 0.0, 1.0, 0.0}, torch::kDouble), 1.0);
                  },
                  torch::rand({4, 4}) * 0.3, seed).worst_rel, 1e-3);
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& g) { return blink_loss(ear_tensor(real_lm), ear_tensor(g)); },
                                 real_lm + torch::randn({2, 12, 2}), seed).worst_rel, 1e-3);
  }
}

TEST(Losses, DiscriminatorComposedGradients) {
  Config cfg = tiny_config();
  torch::manual_seed(8);
  FrameDiscriminator d(cfg);
  d->to(torch::kDouble);
  auto id = torch::rand({1, 3, 64, 64}, torch::kDouble);
  auto real = torch::rand({1, 3, 64, 64}, torch::kDouble);
  for (unsigned seed : {1u, 2u}) {
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& g) { return gan_loss({}, d->forward(g, id), GanSide::Generator); },
                                 torch::rand({1, 3, 64, 64}), seed).worst_rel, 1e-2);
    EXPECT_LT(oracle::grad_check(
                  [&](const torch::Tensor& g) {
                    return feature_matching_loss(d->forward(real, id).features, d->forward(g, id).features);
                  },
                  torch::rand({1, 3, 64, 64}), seed).worst_rel, 1e-2);
  }
}

TEST(LandmarkRegressor, OutputsPixelCoordinates) {
  torch::manual_seed(9);
  LandmarkRegressor reg(32, 8);
  auto out = reg->forward(torch::rand({2, 3, 32, 32}));
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{2, 12, 2}));
  EXPECT_GE(out.min().item<double>(), -0.5);
  EXPECT_LE(out.max().item<double>(), 31.5);
}
