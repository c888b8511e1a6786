#include "a2v/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "a2v/dataset.hpp"
#include "a2v/error.hpp"

namespace a2v {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr int kBlock = 64;
constexpr double kEdgeDensity = 0.002;
constexpr double kBeta = 3.6;
constexpr double kPJnb = 0.63;

void require_same(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                                              std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                                              std::to_string(b.height) + "x" + std::to_string(b.channels));
  }
}

// Valid-mode separable filtering: output is (W - k + 1) x (H - k + 1).
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same(a, b);
  if (a.pixels.empty()) throw Error(ErrorCode::TooSmall, "empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  if (se == 0.0) return kPsnrInfinite;
  const double mse = se / static_cast<double>(a.pixels.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

Gray gray_of(const Image& img) { return {img.width, img.height, to_gray(img)}; }

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= sum;
  return k;
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b);
  return ssim(gray_of(a), gray_of(b));
}

double ssim(const Gray& a, const Gray& b) {
  if (a.width != b.width || a.height != b.height) throw Error(ErrorCode::ShapeMismatch, "ssim planes differ");
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    throw Error(ErrorCode::TooSmall, "ssim needs at least 11x11 pixels");
  }
  const auto k = gaussian_kernel(kSsimWindow, kSsimSigma);
  const int w = a.width;
  const int h = a.height;
  std::vector<double> aa(a.v.size()), bb(a.v.size()), ab(a.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    aa[i] = a.v[i] * a.v[i];
    bb[i] = b.v[i] * b.v[i];
    ab[i] = a.v[i] * b.v[i];
  }
  const auto mu_a = filter_valid(a.v, w, h, k);
  const auto mu_b = filter_valid(b.v, w, h, k);
  const auto e_aa = filter_valid(aa, w, h, k);
  const auto e_bb = filter_valid(bb, w, h, k);
  const auto e_ab = filter_valid(ab, w, h, k);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

Gray gaussian_blur(const Gray& g, double sigma) {
  if (sigma <= 0.0) return g;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto k = gaussian_kernel(2 * radius + 1, sigma);
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  Gray tmp = g;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * g.at(clampi(x + i, g.width), y);
      tmp.v[static_cast<std::size_t>(y) * g.width + x] = acc;
    }
  }
  Gray out = g;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(x, clampi(y + i, g.height));
      out.v[static_cast<std::size_t>(y) * g.width + x] = acc;
    }
  }
  return out;
}

int edge_width(const Gray& g, int x, int y) {
  // Gradient direction along the row decides which way intensity rises.
  const double left = g.at(std::max(x - 1, 0), y);
  const double right = g.at(std::min(x + 1, g.width - 1), y);
  const bool rising = right - left >= 0.0;
  auto up = [&](int from, int to) { return rising ? g.at(to, y) > g.at(from, y) : g.at(to, y) < g.at(from, y); };
  int hi = x;
  while (hi + 1 < g.width && up(hi, hi + 1)) ++hi;
  int lo = x;
  while (lo - 1 >= 0 && up(lo - 1, lo)) --lo;
  return std::max(hi - lo, 1);
}

double cpbd(const Image& img) { return cpbd(gray_of(img)); }

double cpbd(const Gray& g) {
  const int w = g.width;
  const int h = g.height;
  std::vector<double> gx(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      gx[static_cast<std::size_t>(y) * w + x] = (g.at(x + 1, y - 1) + 2 * g.at(x + 1, y) + g.at(x + 1, y + 1)) -
                                                (g.at(x - 1, y - 1) + 2 * g.at(x - 1, y) + g.at(x - 1, y + 1));
    }
  }
  double sq = 0.0;
  for (double v : gx) sq += v * v;
  const double threshold = 2.0 * std::sqrt(sq / static_cast<double>(gx.size()));
  std::vector<char> edge(gx.size(), 0);
  if (threshold > 0.0) {
    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        const double m = std::abs(gx[static_cast<std::size_t>(y) * w + x]);
        // Thin to local maxima along the row.
        if (m > threshold && m >= std::abs(gx[static_cast<std::size_t>(y) * w + x - 1]) &&
            m >= std::abs(gx[static_cast<std::size_t>(y) * w + x + 1])) {
          edge[static_cast<std::size_t>(y) * w + x] = 1;
        }
      }
    }
  }

  std::size_t total = 0;
  std::size_t sharp = 0;
  for (int by = 0; by + kBlock <= h; by += kBlock) {
    for (int bx = 0; bx + kBlock <= w; bx += kBlock) {
      int count = 0;
      double lo = 255.0, hi = 0.0;
      for (int y = by; y < by + kBlock; ++y) {
        for (int x = bx; x < bx + kBlock; ++x) {
          count += edge[static_cast<std::size_t>(y) * w + x];
          lo = std::min(lo, g.at(x, y));
          hi = std::max(hi, g.at(x, y));
        }
      }
      if (count <= kEdgeDensity * kBlock * kBlock) continue;
      const double w_jnb = hi - lo <= 50.0 ? 5.0 : 3.0;
      for (int y = by; y < by + kBlock; ++y) {
        for (int x = bx; x < bx + kBlock; ++x) {
          if (!edge[static_cast<std::size_t>(y) * w + x]) continue;
          const double p = 1.0 - std::exp(-std::pow(edge_width(g, x, y) / w_jnb, kBeta));
          ++total;
          if (std::lround(p * 100.0) <= std::lround(kPJnb * 100.0)) ++sharp;
        }
      }
    }
  }
  if (total == 0) throw Error(ErrorCode::NoEdges, "no 64x64 block passes the edge density threshold");
  return static_cast<double>(sharp) / static_cast<double>(total);
}

ExtractorEmbedder::ExtractorEmbedder(FeatureExtractor extractor) : extractor_(std::move(extractor)) {}

std::vector<double> ExtractorEmbedder::embed(const Image& img, const std::string&) {
  torch::NoGradGuard no_grad;
  const auto feats = extractor_->forward(image_to_tensor(img).unsqueeze(0));
  std::vector<torch::Tensor> pooled;
  for (const auto& f : feats) pooled.push_back(f.mean({2, 3}).flatten());
  auto v = torch::cat(pooled).to(torch::kDouble);
  v = v / v.norm().clamp_min(1e-12);
  return {v.data_ptr<double>(), v.data_ptr<double>() + v.numel()};
}

FileEmbedder::FileEmbedder(const std::filesystem::path& table) : source_(table.filename().string()) {
  std::ifstream in(table);
  if (!in) throw Error(ErrorCode::MissingFile, table.string());
  std::string line;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    std::vector<double> v;
    for (double x; ss >> x;) v.push_back(x);
    if (v.empty() || (dim != 0 && v.size() != dim)) {
      throw Error(ErrorCode::DimensionMismatch, table.string() + ": bad embedding for " + key);
    }
    dim = v.size();
    table_[key] = std::move(v);
  }
}

std::vector<double> FileEmbedder::embed(const Image&, const std::string& key) {
  auto it = table_.find(key);
  if (it == table_.end()) throw Error(ErrorCode::MissingFile, "no embedding for " + key);
  return it->second;
}

bool acd_cosine_passes(double d) { return d < kAcdCosineThreshold; }
bool acd_euclidean_passes(double d) { return d < kAcdEuclideanThreshold; }

AcdResult acd_from_embeddings(const std::vector<std::vector<double>>& gen,
                              const std::vector<std::vector<double>>& real) {
  if (gen.size() != real.size() || gen.empty()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(gen.size()) + " generated vs " + std::to_string(real.size()) + " reference");
  }
  AcdResult r;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (gen[i].size() != real[i].size()) throw Error(ErrorCode::DimensionMismatch, "embedding sizes differ");
    const double na = std::sqrt(dot(gen[i], gen[i]));
    const double nb = std::sqrt(dot(real[i], real[i]));
    const double cos = na > 0 && nb > 0 ? dot(gen[i], real[i]) / (na * nb) : 0.0;
    r.cosine += std::max(0.0, 1.0 - cos);
    double sq = 0.0;
    for (std::size_t j = 0; j < gen[i].size(); ++j) sq += (gen[i][j] - real[i][j]) * (gen[i][j] - real[i][j]);
    r.euclidean += std::sqrt(sq);
  }
  r.cosine /= static_cast<double>(gen.size());
  r.euclidean /= static_cast<double>(gen.size());
  r.same_identity = acd_cosine_passes(r.cosine) && acd_euclidean_passes(r.euclidean);
  return r;
}

AcdResult acd(const std::vector<Image>& gen, const std::vector<Image>& real, IdentityEmbedder& embedder,
              const std::vector<std::string>& gen_keys, const std::vector<std::string>& real_keys) {
  if (gen.size() != real.size() || gen.empty()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(gen.size()) + " generated vs " + std::to_string(real.size()) + " reference");
  }
  std::vector<std::vector<double>> eg, er;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    eg.push_back(embedder.embed(gen[i], i < gen_keys.size() ? gen_keys[i] : "generated/" + std::to_string(i)));
    er.push_back(embedder.embed(real[i], i < real_keys.size() ? real_keys[i] : "reference/" + std::to_string(i)));
  }
  auto r = acd_from_embeddings(eg, er);
  r.embedder = embedder.label();
  return r;
}

std::vector<double> rolling_median(const std::vector<double>& x, int window) {
  const int n = static_cast<int>(x.size());
  const int half = window / 2;
  std::vector<double> out(x.size());
  std::vector<double> buf;
  for (int i = 0; i < n; ++i) {
    buf.assign(x.begin() + std::max(0, i - half), x.begin() + std::min(n, i + half + 1));
    std::sort(buf.begin(), buf.end());
    const std::size_t m = buf.size();
    out[static_cast<std::size_t>(i)] = m % 2 == 1 ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
  }
  return out;
}

int detect_blinks(const std::vector<double>& ear) {
  if (ear.size() < 3) throw Error(ErrorCode::TooShort, "blink detection needs at least 3 frames");
  const auto med = rolling_median(ear, 25);
  int blinks = 0;
  bool in_run = false;
  for (std::size_t i = 0; i < ear.size(); ++i) {
    const bool low = ear[i] < 0.75 * med[i];
    if (low && !in_run) ++blinks;
    in_run = low;
  }
  return blinks;
}

double word_error_rate(const std::string& reference, const std::string& hypothesis) {
  auto words = [](const std::string& s) {
    std::istringstream ss(s);
    return std::vector<std::string>{std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
  };
  const auto r = words(reference);
  const auto h = words(hypothesis);
  if (r.empty()) throw Error(ErrorCode::InvalidArgument, "empty reference transcript");
  std::vector<std::size_t> prev(h.size() + 1), cur(h.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= r.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= h.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[h.size()]) / static_cast<double>(r.size());
}

std::map<std::string, double> read_wer_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorCode::InvalidArgument, path.string() + ": expected 3 columns");
    out[line.substr(0, t1)] = word_error_rate(line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1));
  }
  return out;
}

ClipMetrics evaluate_clip(const std::string& clip_id, const std::vector<Image>& generated,
                          const std::vector<Image>& reference, IdentityEmbedder& embedder,
                          const std::vector<std::string>& gen_keys, const std::vector<std::string>& real_keys) {
  if (generated.size() != reference.size() || generated.empty()) {
    throw Error(ErrorCode::LengthMismatch, clip_id + ": " + std::to_string(generated.size()) + " generated vs " +
                                               std::to_string(reference.size()) + " reference frames");
  }
  ClipMetrics m;
  m.clip_id = clip_id;
  double ssim_sum = 0.0, psnr_sum = 0.0, cpbd_sum = 0.0;
  int psnr_n = 0, cpbd_n = 0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    m.ssim.push_back(ssim(generated[i], reference[i]));
    ssim_sum += m.ssim.back();
    m.psnr_db.push_back(psnr(generated[i], reference[i]));
    if (std::isinf(m.psnr_db.back())) {
      ++m.psnr_excluded;
    } else {
      psnr_sum += m.psnr_db.back();
      ++psnr_n;
    }
    try {
      m.cpbd.emplace_back(cpbd(generated[i]));
      cpbd_sum += *m.cpbd.back();
      ++cpbd_n;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoEdges) throw;
      m.cpbd.emplace_back(std::nullopt);
      ++m.cpbd_excluded;
    }
  }
  m.ssim_mean = ssim_sum / static_cast<double>(generated.size());
  m.psnr_mean = psnr_n > 0 ? psnr_sum / psnr_n : kPsnrInfinite;
  m.cpbd_mean = cpbd_n > 0 ? cpbd_sum / cpbd_n : std::nan("");
  m.acd = acd(generated, reference, embedder, gen_keys, real_keys);
  return m;
}

nlohmann::json to_json(const ClipMetrics& m) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::json psnr_arr = nlohmann::json::array();
  for (double v : m.psnr_db) psnr_arr.push_back(num(v));
  nlohmann::json cpbd_arr = nlohmann::json::array();
  for (const auto& v : m.cpbd) cpbd_arr.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return {{"type", "clip"},
          {"clip_id", m.clip_id},
          {"frames", m.ssim.size()},
          {"ssim", m.ssim},
          {"psnr_db", psnr_arr},
          {"cpbd", cpbd_arr},
          {"ssim_mean", m.ssim_mean},
          {"psnr_mean", num(m.psnr_mean)},
          {"psnr_excluded", m.psnr_excluded},
          {"cpbd_mean", num(m.cpbd_mean)},
          {"cpbd_excluded", m.cpbd_excluded},
          {"acd_cosine", m.acd.cosine},
          {"acd_euclidean", m.acd.euclidean},
          {"acd_same_identity", m.acd.same_identity},
          {"acd_embedder", m.acd.embedder},
          {"blink_count", m.blink_count ? nlohmann::json(*m.blink_count) : nlohmann::json(nullptr)},
          {"wer", m.wer ? nlohmann::json(*m.wer) : nlohmann::json(nullptr)}};
}

}  // namespace a2v
