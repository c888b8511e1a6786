#include "a2v/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>

#include <json.hpp>

#include "a2v/error.hpp"
#include "a2v/manifest.hpp"
#include "a2v/wav.hpp"

namespace a2v {

namespace {

constexpr double kMouthMinHeight = 1.0;
constexpr double kMouthMaxHeight = 13.0;
constexpr double kRmsFull = 0.4;

struct Layer {
  // coverage in [0, 1] of a 64-unit point
  std::function<bool(double, double)> inside;
  const std::uint8_t* color;
};

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> frame_rms(const Waveform& w, int fps) {
  const int stride = compute_stride(w.sample_rate(), fps);
  const auto n = frame_count_for(w.size(), w.sample_rate(), fps);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  const auto& s = w.samples();
  for (std::int64_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::int64_t i = k * stride; i < (k + 1) * stride; ++i) {
      if (i < static_cast<std::int64_t>(s.size())) acc += static_cast<double>(s[static_cast<std::size_t>(i)]) * s[static_cast<std::size_t>(i)];
    }
    out[static_cast<std::size_t>(k)] = std::sqrt(acc / stride);
  }
  return out;
}

FaceIdentity random_identity(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto byte = [&](double lo, double hi) { return static_cast<std::uint8_t>(std::lround(uni(lo, hi))); };
  FaceIdentity id{};
  for (int c = 0; c < 3; ++c) id.background[c] = byte(20, 235);
  const double tone = uni(0.0, 1.0);
  id.skin[0] = static_cast<std::uint8_t>(std::lround(120 + 120 * tone + uni(-10, 10)));
  id.skin[1] = static_cast<std::uint8_t>(std::lround(80 + 110 * tone + uni(-10, 10)));
  id.skin[2] = static_cast<std::uint8_t>(std::lround(55 + 100 * tone + uni(-10, 10)));
  for (int c = 0; c < 3; ++c) id.hair[c] = byte(10, 110);
  id.lips[0] = byte(70, 130);
  id.lips[1] = byte(10, 45);
  id.lips[2] = byte(15, 55);
  id.face_rx = uni(19.0, 23.0);
  id.face_ry = uni(23.0, 27.0);
  id.face_cy = uni(33.0, 35.0);
  id.eye_y = uni(26.5, 29.0);
  id.eye_sep = uni(8.5, 11.0);
  id.eye_half_width = uni(4.3, 5.5);
  id.eye_half_height = uni(2.2, 2.8);
  id.mouth_y = uni(45.0, 48.0);
  id.mouth_half_width = uni(5.5, 8.5);
  return id;
}

Image render_face(const FaceIdentity& id, double mouth_open, double eye_open, int resolution,
                  EyeLandmarks* landmarks, double* mouth_height) {
  const double scale = resolution / 64.0;
  const double mouth_h = kMouthMinHeight + (kMouthMaxHeight - kMouthMinHeight) * std::clamp(mouth_open, 0.0, 1.0);
  const double eye_h = id.eye_half_height * std::clamp(eye_open, 0.0, 1.0);
  static constexpr std::uint8_t kEye[3] = {25, 20, 30};
  static constexpr std::uint8_t kMouthInside[3] = {35, 8, 12};
  std::uint8_t nose[3];
  for (int c = 0; c < 3; ++c) nose[c] = static_cast<std::uint8_t>(id.skin[c] * 0.8);

  const double lx = 32.0 - id.eye_sep;
  const double rx = 32.0 + id.eye_sep;
  std::vector<Layer> layers;
  layers.push_back({[&](double x, double y) { return in_ellipse(x, y, 32.0, id.face_cy - 5.0, id.face_rx + 3.0, id.face_ry); },
                    id.hair});
  layers.push_back({[&](double x, double y) { return in_ellipse(x, y, 32.0, id.face_cy, id.face_rx, id.face_ry); },
                    id.skin});
  for (double ex : {lx, rx}) {
    layers.push_back({[&, ex](double x, double y) {
                        return std::abs(x - ex) <= id.eye_half_width + 0.5 && y >= id.eye_y - 5.2 && y <= id.eye_y - 4.0;
                      },
                      id.hair});
    layers.push_back({[&, ex](double x, double y) {
                        return eye_h > 0.0 && in_ellipse(x, y, ex, id.eye_y, id.eye_half_width, eye_h);
                      },
                      kEye});
  }
  layers.push_back({[&](double x, double y) { return in_ellipse(x, y, 32.0, 38.5, 1.6, 2.5); }, nose});
  layers.push_back({[&](double x, double y) {
                      return in_ellipse(x, y, 32.0, id.mouth_y, id.mouth_half_width + 1.2, mouth_h / 2.0 + 1.2);
                    },
                    id.lips});
  layers.push_back({[&](double x, double y) {
                      return in_ellipse(x, y, 32.0, id.mouth_y, id.mouth_half_width, mouth_h / 2.0);
                    },
                    kMouthInside});

  constexpr int kSub = 4;
  Image img(resolution, resolution, 3);
  for (int py = 0; py < resolution; ++py) {
    for (int px = 0; px < resolution; ++px) {
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double x = (px + (sx + 0.5) / kSub) / scale;
          const double y = (py + (sy + 0.5) / kSub) / scale;
          const std::uint8_t* color = id.background;
          for (const auto& layer : layers) {
            if (layer.inside(x, y)) color = layer.color;
          }
          for (int c = 0; c < 3; ++c) acc[c] += color[c];
        }
      }
      for (int c = 0; c < 3; ++c) img.at(px, py, c) = static_cast<std::uint8_t>(std::lround(acc[c] / (kSub * kSub)));
    }
  }

  if (landmarks != nullptr) {
    // Pixel coordinates with pixel centers on integers.
    const double off = std::sqrt(8.0 / 9.0) * eye_h;
    auto eye_points = [&](double ex) {
      const double a = id.eye_half_width;
      auto p = [&](double x, double y) { return Point2{x * scale - 0.5, y * scale - 0.5}; };
      return EyePoints{p(ex - a, id.eye_y), p(ex - a / 3, id.eye_y - off), p(ex + a / 3, id.eye_y - off),
                       p(ex + a, id.eye_y), p(ex + a / 3, id.eye_y + off), p(ex - a / 3, id.eye_y + off)};
    };
    landmarks->left = eye_points(lx);
    landmarks->right = eye_points(rx);
  }
  if (mouth_height != nullptr) *mouth_height = mouth_h * scale;
  return img;
}

SyntheticClip render_synthetic_clip(std::uint64_t seed, int index, const SyntheticOptions& opts) {
  std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(index)));
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const FaceIdentity id = random_identity(mix(seed ^ 0xA5A5A5A5ULL, static_cast<std::uint64_t>(index)));
  const auto n_samples = static_cast<std::size_t>(std::lround(opts.duration_s * opts.sample_rate));
  std::vector<float> samples(n_samples, 0.0f);

  // Syllables: a raised-cosine envelope over a three-harmonic tone, separated by pauses.
  double t = uni(0.04, 0.2);
  while (t < opts.duration_s) {
    const double len = uni(0.10, 0.32);
    const double f0 = uni(110.0, 320.0);
    const double amp = uni(0.25, 0.8);
    const auto start = static_cast<std::size_t>(t * opts.sample_rate);
    const auto count = static_cast<std::size_t>(len * opts.sample_rate);
    for (std::size_t i = 0; i < count && start + i < n_samples; ++i) {
      const double tt = static_cast<double>(i) / opts.sample_rate;
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / count);
      const double ph = 2.0 * std::numbers::pi * f0 * tt;
      samples[start + i] += static_cast<float>(amp * env * (0.6 * std::sin(ph) + 0.3 * std::sin(2 * ph) + 0.1 * std::sin(3 * ph)));
    }
    t += len + uni(0.06, 0.24);
  }
  std::normal_distribution<double> noise(0.0, 0.002);
  for (auto& s : samples) s = std::clamp(static_cast<float>(s + noise(rng)), -1.0f, 1.0f);

  SyntheticClip clip{"", id, Waveform(std::move(samples), opts.sample_rate), {}, {}, {}, {}, {}};
  char name[32];
  std::snprintf(name, sizeof(name), "clip_%05d", index);
  clip.clip_id = name;
  clip.rms = frame_rms(clip.audio, opts.fps);
  const std::size_t n_frames = clip.rms.size();

  // Blink schedule: three-frame closures separated by 15-45 frames.
  std::vector<double> eye_open(n_frames, 1.0);
  clip.blinking.assign(n_frames, false);
  auto next = static_cast<std::size_t>(uni(5.0, 30.0));
  while (next + 3 <= n_frames) {
    const double profile[3] = {0.3, 0.08, 0.3};
    for (int i = 0; i < 3; ++i) {
      eye_open[next + static_cast<std::size_t>(i)] = profile[i];
      clip.blinking[next + static_cast<std::size_t>(i)] = true;
    }
    next += 3 + static_cast<std::size_t>(uni(15.0, 45.0));
  }

  for (std::size_t k = 0; k < n_frames; ++k) {
    EyeLandmarks lm;
    double mouth_h = 0.0;
    clip.frames.push_back(
        render_face(id, std::min(clip.rms[k] / kRmsFull, 1.0), eye_open[k], opts.resolution, &lm, &mouth_h));
    clip.landmarks.push_back(lm);
    clip.mouth_height.push_back(mouth_h);
  }
  return clip;
}

std::filesystem::path make_synthetic_corpus(int n_clips, std::uint64_t seed, const std::filesystem::path& out_dir,
                                            const SyntheticOptions& opts) {
  if (n_clips < 1) throw Error(ErrorCode::InvalidArgument, "n_clips must be at least 1");
  std::filesystem::create_directories(out_dir);
  std::vector<ClipManifestEntry> entries;
  for (int i = 0; i < n_clips; ++i) {
    const SyntheticClip clip = render_synthetic_clip(seed, i, opts);
    const auto dir = out_dir / clip.clip_id;
    const auto frames_dir = dir / "frames";
    std::filesystem::create_directories(frames_dir);
    for (std::size_t k = 0; k < clip.frames.size(); ++k) {
      write_pnm(clip.frames[k], frame_path(frames_dir, static_cast<int>(k)));
    }
    write_wav(clip.audio, dir / "audio.wav");
    write_landmarks(clip.landmarks, dir / "landmarks.txt");
    nlohmann::json meta = {{"clip_id", clip.clip_id},
                           {"seed", seed},
                           {"index", i},
                           {"mouth_height", clip.mouth_height},
                           {"rms", clip.rms},
                           {"blinking", clip.blinking}};
    std::ofstream(dir / "meta.json") << meta.dump() << "\n";

    ClipManifestEntry e;
    e.clip_id = clip.clip_id;
    e.frames_path = std::filesystem::path(clip.clip_id) / "frames";
    e.audio_path = std::filesystem::path(clip.clip_id) / "audio.wav";
    e.landmarks_path = std::filesystem::path(clip.clip_id) / "landmarks.txt";
    e.fps = opts.fps;
    entries.push_back(e);
  }
  const auto manifest = out_dir / "manifest.jsonl";
  write_manifest(entries, manifest);
  return manifest;
}

}  // namespace a2v
