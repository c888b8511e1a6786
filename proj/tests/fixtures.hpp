#pragma once

#include <vector>

#include "a2v/dataset.hpp"
#include "a2v/synthetic.hpp"

namespace a2v::testing {

/// In-memory synthetic clips at the config's resolution.
inline std::vector<ClipData> synthetic_dataset(int n, std::uint64_t seed, const Config& cfg, double seconds = 1.0,
                                               bool landmarks = true) {
  SyntheticOptions opts;
  opts.resolution = cfg.gen.resolution;
  opts.duration_s = seconds;
  std::vector<ClipData> out;
  for (int i = 0; i < n; ++i) {
    auto clip = render_synthetic_clip(seed, i, opts);
    std::optional<std::vector<EyeLandmarks>> lm;
    if (landmarks) lm = clip.landmarks;
    out.push_back(make_clip_data(clip.clip_id, clip.frames, clip.audio, lm, 0, cfg));
  }
  return out;
}

}  // namespace a2v::testing
