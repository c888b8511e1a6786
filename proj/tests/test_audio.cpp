#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "a2v/audio.hpp"
#include "a2v/checkpoint.hpp"
#include "a2v/encoder.hpp"
#include "oracles/mfcc_oracle.hpp"
#include "test_util.hpp"

using namespace a2v;
using a2v::testing::error_code_of;

namespace {

Waveform tone(double seconds, double hz, double amp = 0.5, int sr = 16000) {
  std::vector<float> s(static_cast<std::size_t>(std::lround(seconds * sr)));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * i / sr));
  return Waveform(std::move(s), sr);
}

}  // namespace

TEST(Stride, DefaultRates) {
  EXPECT_EQ(compute_stride(16000, 25), 640);
  EXPECT_EQ(compute_stride(16000, 16), 1000);
  EXPECT_EQ(error_code_of([] { compute_stride(16000, 30); }), ErrorCode::NonDivisible);
}

TEST(FrameWindows, OneSecondGivesTwentyFiveOverlappingWindows) {
  const auto w = frame_windows(tone(1.0, 440), 25, 200);
  ASSERT_EQ(w.size(), 25u);
  EXPECT_EQ(w[0].center_sample, 320);
  EXPECT_EQ(w[1].center_sample, 960);
  EXPECT_EQ(w[2].center_sample, 1600);
  for (const auto& win : w) EXPECT_EQ(win.samples.size(), 3200u);
  // consecutive windows share window - stride samples
  const auto overlap = 3200 - (w[1].center_sample - w[0].center_sample);
  EXPECT_EQ(overlap, 2560);
  EXPECT_DOUBLE_EQ(overlap / 16000.0, 0.16);
}

TEST(FrameWindows, CountFollowsDuration) {
  EXPECT_EQ(frame_windows(tone(2.0, 440), 25, 200).size(), 50u);
  EXPECT_EQ(frame_windows(tone(3.0, 440), 25, 200).size(), 75u);
  EXPECT_EQ(error_code_of([] { frame_windows(tone(0.01, 440), 25, 200); }), ErrorCode::EmptyAudio);
}

TEST(FrameWindows, SamplesMatchSourceAndZeroPadding) {
  const auto src = tone(1.0, 300);
  const auto w = frame_windows(src, 25, 200);
  // window 0 starts 1280 samples before the signal
  for (int i = 0; i < 1280; ++i) EXPECT_EQ(w[0].samples[i], 0.0f);
  EXPECT_EQ(w[0].samples[1280], src.samples()[0]);
  EXPECT_EQ(w[10].samples[0], src.samples()[10 * 640 + 320 - 1600]);
}

TEST(FrameWindows, RateMismatchIsRejected) {
  AudioConfig cfg;
  EXPECT_EQ(error_code_of([&] { extract_windows(tone(1.0, 440, 0.5, 8000), cfg); }), ErrorCode::NonDivisible);
}

TEST(Mfcc, TwentyFramesOfThirteen) {
  AudioConfig cfg;
  MfccExtractor ex(cfg);
  std::vector<float> z(3200, 0.0f);
  const auto m = ex.compute(z);
  EXPECT_EQ(m.rows, 20);
  EXPECT_EQ(m.cols, 13);
}

TEST(Mfcc, SilenceRowsIdentical) {
  AudioConfig cfg;
  MfccExtractor ex(cfg);
  const auto m = ex.compute(std::vector<float>(3200, 0.0f));
  for (int r = 1; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) EXPECT_EQ(m.at(r, c), m.at(0, c));
}

TEST(Mfcc, MatchesDirectEvaluation) {
  AudioConfig cfg;
  MfccExtractor ex(cfg);
  std::mt19937 rng(5);
  std::normal_distribution<float> nd(0.0f, 0.1f);
  for (int variant = 0; variant < 2; ++variant) {
    std::vector<float> x(3200);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = variant == 0 ? static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * 440 * i / 16000.0)) : nd(rng);
    }
    const auto m = ex.compute(x);
    const auto ref = oracle::mfcc(x);
    ASSERT_EQ(ref.size(), 20u);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 13; ++c) EXPECT_NEAR(m.at(r, c), ref[r][c], 1e-3 * std::max(1.0, std::abs(ref[r][c])));
  }
}

TEST(Mfcc, ToneIsStableAndDistinctFromNoise) {
  AudioConfig cfg;
  MfccExtractor ex(cfg);
  std::vector<float> sine(3200), noise(3200);
  std::mt19937 rng(1);
  std::normal_distribution<float> nd(0.0f, 0.3f);
  for (std::size_t i = 0; i < sine.size(); ++i) {
    sine[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * 440 * i / 16000.0));
    noise[i] = nd(rng);
  }
  const auto ms = ex.compute(sine);
  const auto mn = ex.compute(noise);
  // interior rows avoid the zero-padded edges
  double row_var = 0, contrast = 0;
  for (int r = 3; r < 17; ++r) {
    for (int c = 0; c < 13; ++c) {
      ASSERT_TRUE(std::isfinite(ms.at(r, c)));
      row_var += std::abs(ms.at(r, c) - ms.at(r - 1, c));
      contrast += std::abs(ms.at(r, c) - mn.at(r, c));
    }
  }
  EXPECT_LT(row_var, contrast);
}

TEST(Mfcc, FilterbankCoversSpectrum) {
  AudioConfig cfg;
  MfccExtractor ex(cfg);
  const auto& fb = ex.filterbank();
  ASSERT_EQ(fb.size(), 26u);
  for (const auto& f : fb) {
    double peak = 0;
    for (double v : f) peak = std::max(peak, v);
    EXPECT_GT(peak, 0.5);
  }
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Encoder, ZeroInputZeroHeadGivesZero) {
  AudioConfig cfg;
  torch::manual_seed(0);
  ContentEncoder enc(cfg, 256, /*zero_init_head=*/true);
  Mfcc m{20, 13, std::vector<float>(260, 0.0f)};
  const auto e = encode_content(m, enc, 3);
  ASSERT_EQ(e.vector.size(), 256u);
  EXPECT_EQ(e.frame_index, 3);
  for (float v : e.vector) EXPECT_EQ(v, 0.0f);
}

TEST(Encoder, DeterministicAcrossCalls) {
  AudioConfig cfg;
  torch::manual_seed(0);
  ContentEncoder enc(cfg, 64);
  Mfcc m{20, 13, std::vector<float>(260)};
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = std::sin(static_cast<float>(i));
  EXPECT_EQ(encode_content(m, enc).vector, encode_content(m, enc).vector);
}

TEST(Encoder, WrongWidthRejected) {
  AudioConfig cfg;
  ContentEncoder enc(cfg, 64);
  Mfcc m{20, 12, std::vector<float>(240)};
  EXPECT_EQ(error_code_of([&] { encode_content(m, enc); }), ErrorCode::DimensionMismatch);
}

TEST(Encoder, LoadWeightsChecksShapes) {
  a2v::testing::TempDir dir("enc");
  AudioConfig cfg;
  torch::manual_seed(1);
  ContentEncoder a(cfg, 64), b(cfg, 32);
  Checkpoint ck;
  export_module(*a, "", ck.tensors);
  save_checkpoint(ck, dir / "enc.a2vc");
  EXPECT_EQ(error_code_of([&] { b->load_weights(dir / "enc.a2vc"); }), ErrorCode::WeightsShapeMismatch);
  torch::manual_seed(2);
  ContentEncoder c(cfg, 64);
  c->load_weights(dir / "enc.a2vc");
  Mfcc m{20, 13, std::vector<float>(260, 1.0f)};
  EXPECT_EQ(encode_content(m, a).vector, encode_content(m, c).vector);
}
