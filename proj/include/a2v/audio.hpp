#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "a2v/config.hpp"

namespace a2v {

/// Mono signal normalized to [-1, 1].
class Waveform {
 public:
  /// Throws InvalidArgument on an empty buffer, non-finite samples or a
  /// non-positive rate.
  Waveform(std::vector<float> samples, int sample_rate);

  const std::vector<float>& samples() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples_.size()) / sample_rate_;
  }

 private:
  std::vector<float> samples_;
  int sample_rate_;
};

/// Row-major [rows x cols] matrix of MFCC frames.
struct Mfcc {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const Mfcc&) const = default;
};

struct AudioWindow {
  int frame_index = 0;
  std::int64_t center_sample = 0;
  std::vector<float> samples;
  Mfcc mfcc;
};

/// Samples between consecutive window centers. Throws NonDivisible when the
/// rate is not an integer multiple of the frame rate.
int compute_stride(int sample_rate, int fps);

/// Number of video frames covered by `num_samples` at `fps`, rounded half up.
std::int64_t frame_count_for(std::size_t num_samples, int sample_rate, int fps);

/// One zero-padded window per video frame, window k centered on
/// stride/2 + k*stride. MFCC fields are left empty.
std::vector<AudioWindow> frame_windows(const Waveform& w, int fps, int window_ms);

/// MFCC front end: Hamming analysis windows centered on each hop cell,
/// HTK-mel triangular filterbank, natural log, orthonormal DCT-II.
class MfccExtractor {
 public:
  explicit MfccExtractor(const AudioConfig& cfg);
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  /// Rows = ceil(len / hop), cols = n_mfcc. Safe to call concurrently.
  Mfcc compute(std::span<const float> window) const;

  int frames_for(std::size_t len) const {
    return static_cast<int>((len + hop_ - 1) / hop_);
  }
  const std::vector<std::vector<double>>& filterbank() const noexcept { return mel_filters_; }

 private:
  struct Plan;
  int sample_rate_;
  int hop_;
  int analysis_len_;
  int n_fft_;
  int n_mels_;
  int n_mfcc_;
  std::vector<double> window_;
  std::vector<std::vector<double>> mel_filters_;  // [n_mels][n_fft/2 + 1]
  std::vector<std::vector<double>> dct_;          // [n_mfcc][n_mels]
  std::unique_ptr<Plan> plan_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Convenience: framing plus MFCC for every window.
std::vector<AudioWindow> extract_windows(const Waveform& w, const AudioConfig& cfg);

}  // namespace a2v
