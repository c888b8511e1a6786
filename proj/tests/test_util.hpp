#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "a2v/config.hpp"
#include "a2v/error.hpp"

namespace a2v::testing {

/// Smallest valid resolution and narrow networks so unit tests stay fast on one core.
inline Config tiny_config() {
  Config c;
  c.gen.resolution = 64;
  c.gen.base_channels = 16;
  c.gen.min_channels = 8;
  c.gen.audio_dim = 32;
  c.gen.spade_hidden = 8;
  c.audio.encoder_channels = 8;
  c.audio.encoder_hidden = 8;
  c.disc.frame_channels = 8;
  c.disc.temporal_channels = 8;
  c.disc.sync_channels = 8;
  c.disc.sync_resolution = 32;
  c.disc.sync_dim = 16;
  c.loss.extractor_channels = 4;
  c.train.batch_size = 4;
  c.train.min_phase_epochs = 1;
  c.train.max_phase_epochs = {1, 1, 1};
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("a2v_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

template <typename F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an a2v::Error");
}

}  // namespace a2v::testing
