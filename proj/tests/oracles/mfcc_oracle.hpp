#pragma once

// Direct-formula MFCC: naive DFT, mel triangles from the HTK formula, DCT-II
// written out. Shares no code with the library front end.

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline std::vector<std::vector<double>> mfcc(const std::vector<float>& x, int sr = 16000, int hop = 160,
                                             int win = 400, int n_fft = 512, int n_mels = 26, int n_ceps = 13) {
  const double pi = std::numbers::pi;
  const int rows = (static_cast<int>(x.size()) + hop - 1) / hop;
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> pts;
  for (int i = 0; i < n_mels + 2; ++i) pts.push_back(hz(mel(sr / 2.0) * i / (n_mels + 1)));

  std::vector<std::vector<double>> out;
  for (int t = 0; t < rows; ++t) {
    const long start = static_cast<long>(t) * hop + hop / 2 - win / 2;
    std::vector<double> seg(n_fft, 0.0);
    for (int n = 0; n < win; ++n) {
      const long s = start + n;
      if (s < 0 || s >= static_cast<long>(x.size())) continue;
      seg[n] = x[s] * (0.54 - 0.46 * std::cos(2 * pi * n / (win - 1)));
    }
    std::vector<double> pow(n_fft / 2 + 1);
    for (int k = 0; k <= n_fft / 2; ++k) {
      double re = 0, im = 0;
      for (int n = 0; n < n_fft; ++n) {
        re += seg[n] * std::cos(2 * pi * k * n / n_fft);
        im -= seg[n] * std::sin(2 * pi * k * n / n_fft);
      }
      pow[k] = re * re + im * im;
    }
    std::vector<double> logmel(n_mels);
    for (int m = 0; m < n_mels; ++m) {
      double e = 0;
      for (int k = 0; k <= n_fft / 2; ++k) {
        const double f = k * static_cast<double>(sr) / n_fft;
        double w = 0;
        if (f > pts[m] && f <= pts[m + 1]) w = (f - pts[m]) / (pts[m + 1] - pts[m]);
        else if (f > pts[m + 1] && f < pts[m + 2]) w = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
        e += w * pow[k];
      }
      logmel[m] = std::log(e < 1e-10 ? 1e-10 : e);
    }
    std::vector<double> c(n_ceps);
    for (int i = 0; i < n_ceps; ++i) {
      double acc = 0;
      for (int m = 0; m < n_mels; ++m) acc += logmel[m] * std::cos(pi * i * (2 * m + 1) / (2.0 * n_mels));
      c[i] = acc * std::sqrt((i == 0 ? 1.0 : 2.0) / n_mels);
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace oracle
