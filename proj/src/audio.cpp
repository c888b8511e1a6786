#include "a2v/audio.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "a2v/error.hpp"

namespace a2v {

Waveform::Waveform(std::vector<float> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw Error(ErrorCode::InvalidArgument, "sample_rate must be positive");
  if (samples_.empty()) throw Error(ErrorCode::InvalidArgument, "waveform has no samples");
  for (float s : samples_) {
    if (!std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "non-finite sample");
  }
}

int compute_stride(int sample_rate, int fps) {
  if (sample_rate <= 0 || fps <= 0) {
    throw Error(ErrorCode::InvalidArgument, "sample_rate and fps must be positive");
  }
  if (sample_rate % fps != 0) {
    throw Error(ErrorCode::NonDivisible, std::to_string(sample_rate) + " Hz is not a multiple of " +
                                             std::to_string(fps) + " fps; resample first");
  }
  return sample_rate / fps;
}

std::int64_t frame_count_for(std::size_t num_samples, int sample_rate, int fps) {
  // round(n * fps / sr) with halves rounded up, in exact integer arithmetic
  const auto num = static_cast<std::int64_t>(num_samples) * fps;
  return (2 * num + sample_rate) / (2 * static_cast<std::int64_t>(sample_rate));
}

std::vector<AudioWindow> frame_windows(const Waveform& w, int fps, int window_ms) {
  const int sr = w.sample_rate();
  const int stride = compute_stride(sr, fps);
  const std::int64_t scaled = static_cast<std::int64_t>(window_ms) * sr;
  if (window_ms <= 0 || scaled % 1000 != 0 || (scaled / 1000) % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument, "window length must be an even number of samples");
  }
  const std::int64_t window_len = scaled / 1000;
  if (w.size() < static_cast<std::size_t>(stride)) {
    throw Error(ErrorCode::EmptyAudio, "waveform shorter than one stride");
  }
  const std::int64_t count = frame_count_for(w.size(), sr, fps);
  const auto& src = w.samples();
  const auto len = static_cast<std::int64_t>(src.size());

  std::vector<AudioWindow> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    AudioWindow win;
    win.frame_index = static_cast<int>(k);
    win.center_sample = stride / 2 + k * stride;
    win.samples.assign(static_cast<std::size_t>(window_len), 0.0f);
    const std::int64_t start = win.center_sample - window_len / 2;
    for (std::int64_t i = 0; i < window_len; ++i) {
      const std::int64_t s = start + i;
      if (s >= 0 && s < len) win.samples[static_cast<std::size_t>(i)] = src[static_cast<std::size_t>(s)];
    }
    out.push_back(std::move(win));
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {
// FFTW planning touches global state; execution with new-array calls does not.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct MfccExtractor::Plan {
  fftw_plan plan = nullptr;
};

MfccExtractor::MfccExtractor(const AudioConfig& cfg)
    : sample_rate_(cfg.sample_rate),
      hop_(cfg.hop_ms * cfg.sample_rate / 1000),
      analysis_len_(cfg.analysis_ms * cfg.sample_rate / 1000),
      n_fft_(cfg.n_fft),
      n_mels_(cfg.n_mels),
      n_mfcc_(cfg.n_mfcc),
      plan_(std::make_unique<Plan>()) {
  if (hop_ <= 0 || analysis_len_ <= 1 || n_fft_ < analysis_len_ || n_mfcc_ > n_mels_) {
    throw Error(ErrorCode::InvalidArgument, "inconsistent MFCC configuration");
  }
  using std::numbers::pi;
  window_.resize(static_cast<std::size_t>(analysis_len_));
  for (int n = 0; n < analysis_len_; ++n) {
    window_[static_cast<std::size_t>(n)] = 0.54 - 0.46 * std::cos(2.0 * pi * n / (analysis_len_ - 1));
  }

  const int n_bins = n_fft_ / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate_ / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels_ + 2));
  for (int m = 0; m < n_mels_ + 2; ++m) edges[static_cast<std::size_t>(m)] = mel_to_hz(mel_hi * m / (n_mels_ + 1));
  mel_filters_.assign(static_cast<std::size_t>(n_mels_), std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
  for (int m = 0; m < n_mels_; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_ / n_fft_;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      mel_filters_[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = std::max(0.0, w);
    }
  }

  dct_.assign(static_cast<std::size_t>(n_mfcc_), std::vector<double>(static_cast<std::size_t>(n_mels_)));
  for (int i = 0; i < n_mfcc_; ++i) {
    const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / n_mels_);
    for (int m = 0; m < n_mels_; ++m) {
      dct_[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] =
          scale * std::cos(pi * i * (m + 0.5) / n_mels_);
    }
  }

  std::lock_guard lock(fftw_planner_mutex());
  std::vector<double> in(static_cast<std::size_t>(n_fft_));
  std::vector<fftw_complex> out(static_cast<std::size_t>(n_bins));
  plan_->plan = fftw_plan_dft_r2c_1d(n_fft_, in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan_->plan == nullptr) throw Error(ErrorCode::InvalidArgument, "FFTW planning failed");
}

MfccExtractor::~MfccExtractor() {
  if (plan_ && plan_->plan != nullptr) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

Mfcc MfccExtractor::compute(std::span<const float> window) const {
  const auto len = static_cast<std::int64_t>(window.size());
  const int rows = frames_for(window.size());
  const int n_bins = n_fft_ / 2 + 1;

  Mfcc out;
  out.rows = rows;
  out.cols = n_mfcc_;
  out.values.resize(static_cast<std::size_t>(rows) * n_mfcc_);

  std::vector<double> frame(static_cast<std::size_t>(n_fft_));
  std::vector<fftw_complex> spec(static_cast<std::size_t>(n_bins));
  std::vector<double> power(static_cast<std::size_t>(n_bins));
  std::vector<double> log_mel(static_cast<std::size_t>(n_mels_));

  for (int t = 0; t < rows; ++t) {
    const std::int64_t start = static_cast<std::int64_t>(t) * hop_ + hop_ / 2 - analysis_len_ / 2;
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int n = 0; n < analysis_len_; ++n) {
      const std::int64_t s = start + n;
      if (s >= 0 && s < len) {
        frame[static_cast<std::size_t>(n)] = window_[static_cast<std::size_t>(n)] * window[static_cast<std::size_t>(s)];
      }
    }
    fftw_execute_dft_r2c(plan_->plan, frame.data(), spec.data());
    for (int k = 0; k < n_bins; ++k) {
      const auto& c = spec[static_cast<std::size_t>(k)];
      power[static_cast<std::size_t>(k)] = c[0] * c[0] + c[1] * c[1];
    }
    for (int m = 0; m < n_mels_; ++m) {
      const auto& filt = mel_filters_[static_cast<std::size_t>(m)];
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += filt[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
      log_mel[static_cast<std::size_t>(m)] = std::log(std::max(e, 1e-10));
    }
    for (int i = 0; i < n_mfcc_; ++i) {
      const auto& basis = dct_[static_cast<std::size_t>(i)];
      double c = 0.0;
      for (int m = 0; m < n_mels_; ++m) c += basis[static_cast<std::size_t>(m)] * log_mel[static_cast<std::size_t>(m)];
      out.values[static_cast<std::size_t>(t) * n_mfcc_ + i] = static_cast<float>(c);
    }
  }
  return out;
}

std::vector<AudioWindow> extract_windows(const Waveform& w, const AudioConfig& cfg) {
  if (w.sample_rate() != cfg.sample_rate) {
    throw Error(ErrorCode::NonDivisible, "waveform rate " + std::to_string(w.sample_rate()) +
                                             " differs from configured " + std::to_string(cfg.sample_rate));
  }
  auto windows = frame_windows(w, cfg.fps, cfg.window_ms);
  const MfccExtractor mfcc(cfg);
  for (auto& win : windows) win.mfcc = mfcc.compute(win.samples);
  return windows;
}

}  // namespace a2v
