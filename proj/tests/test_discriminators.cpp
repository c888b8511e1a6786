#include <gtest/gtest.h>

#include "a2v/discriminators.hpp"
#include "oracles/grad_check.hpp"
#include "test_util.hpp"

using namespace a2v;
using a2v::testing::error_code_of;
using a2v::testing::tiny_config;

TEST(FrameDiscriminator, ThreeScalesFourLayers) {
  Config cfg;
  torch::manual_seed(1);
  FrameDiscriminator d(cfg);
  auto x = torch::rand({2, 3, 64, 64});
  auto out = d->forward(x, x);
  ASSERT_EQ(out.scores.size(), 3u);
  ASSERT_EQ(out.features.size(), 3u);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(out.features[s].size(), 4u);
    // first feature layer halves the scale's input side
    EXPECT_EQ(out.features[s][0].size(-1), (64 >> s) / 2);
  }
  auto again = d->forward(x, x);
  for (int s = 0; s < 3; ++s) EXPECT_TRUE(torch::equal(out.scores[s], again.scores[s]));
  EXPECT_EQ(error_code_of([&] { d->forward(torch::rand({1, 3, 32, 32}), torch::rand({1, 3, 32, 32})); }),
            ErrorCode::ShapeMismatch);
}

TEST(ScalePyramid, AveragePooling) {
  auto x = torch::arange(16.0).view({1, 1, 4, 4});
  auto p = scale_pyramid(x, 3);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_DOUBLE_EQ(p[1][0][0][0][0].item<double>(), (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(p[2].item<double>(), 7.5);
}

TEST(TemporalDiscriminator, TwoScalesAndShortWindow) {
  Config cfg;
  torch::manual_seed(2);
  TemporalDiscriminator d(cfg);
  auto out = d->forward(torch::rand({1, 5, 3, 64, 64}));
  ASSERT_EQ(out.scores.size(), 2u);
  for (const auto& s : out.scores) EXPECT_TRUE(torch::isfinite(s).all().item<bool>());
  EXPECT_EQ(error_code_of([&] { d->forward(torch::rand({1, 4, 3, 64, 64})); }), ErrorCode::ShortWindow);
}

TEST(SyncDiscriminator, UnitEmbeddings) {
  Config cfg;
  torch::manual_seed(3);
  SyncDiscriminator d(cfg);
  auto frames = torch::rand({2, 5, 3, 64, 64}) * 2 - 1;
  auto v = d->embed_video(frames);
  EXPECT_EQ(v.sizes(), (std::vector<int64_t>{2, 256}));
  EXPECT_NEAR(v.norm(2, 1).sub(1).abs().max().item<double>(), 0.0, 1e-5);
  EXPECT_TRUE(torch::equal(v, d->embed_video(frames)));
  auto a = d->embed_audio(torch::zeros({1, 20, 13}));
  EXPECT_TRUE(torch::isfinite(a).all().item<bool>());
  EXPECT_NEAR(a.norm().item<double>(), 1.0, 1e-5);
  EXPECT_TRUE(torch::equal(a, d->embed_audio(torch::zeros({1, 20, 13}))));
  EXPECT_EQ(error_code_of([&] { d->embed_video(torch::rand({1, 4, 3, 64, 64})); }), ErrorCode::ShortWindow);
  EXPECT_EQ(error_code_of([&] { d->embed_audio(torch::zeros({1, 19, 13})); }), ErrorCode::ShapeMismatch);
}

TEST(SyncDiscriminator, VideoInputIsLowerHalf) {
  Config cfg;
  SyncDiscriminator d(cfg);
  auto frames = torch::zeros({1, 5, 3, 64, 64});
  frames.slice(3, 0, 32).fill_(1.0);  // upper half only
  EXPECT_EQ(d->video_input(frames).abs().max().item<double>(), 0.0);
}

TEST(SyncDistance, Euclidean) {
  auto v = torch::tensor({{1.0, 0.0}, {0.0, 1.0}});
  auto a = torch::tensor({{1.0, 0.0}, {1.0, 0.0}});
  auto d = sync_distance(v, a);
  EXPECT_NEAR(d[0].item<double>(), 0.0, 1e-6);
  EXPECT_NEAR(d[1].item<double>(), std::sqrt(2.0), 1e-6);
}

TEST(Discriminators, InputGradientsMatchFiniteDifferences) {
  Config cfg = tiny_config();
  torch::manual_seed(4);
  FrameDiscriminator frame(cfg);
  TemporalDiscriminator temporal(cfg);
  SyncDiscriminator sync(cfg);
  frame->to(torch::kDouble);
  temporal->to(torch::kDouble);
  sync->to(torch::kDouble);
  auto id = torch::rand({1, 3, 64, 64}, torch::kDouble);
  auto sum_scores = [](const DiscriminatorOutput& o) {
    torch::Tensor t = torch::zeros({}, torch::kDouble);
    for (const auto& s : o.scores) t = t + s.sum();
    return t;
  };
  for (unsigned seed : {1u, 2u, 3u}) {
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& x) { return sum_scores(frame->forward(x, id)); },
                                 torch::rand({1, 3, 64, 64}), seed).worst_rel, 1e-2);
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& x) { return sum_scores(temporal->forward(x)); },
                                 torch::rand({1, 5, 3, 64, 64}), seed).worst_rel, 1e-2);
    auto probe = torch::randn({1, 16}, torch::kDouble);
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& x) { return (sync->embed_video(x) * probe).sum(); },
                                 torch::rand({1, 5, 3, 64, 64}), seed).worst_rel, 1e-2);
    EXPECT_LT(oracle::grad_check([&](const torch::Tensor& x) { return (sync->embed_audio(x) * probe).sum(); },
                                 torch::randn({1, 20, 13}) * 10, seed).worst_rel, 1e-2);
  }
}
