#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace a2v {

struct AudioConfig {
  int sample_rate = 16000;
  int fps = 25;
  int window_ms = 200;
  int n_mfcc = 13;
  int hop_ms = 10;
  int analysis_ms = 25;
  int n_mels = 26;
  int n_fft = 512;
  // MFCC values are multiplied by this before entering any network.
  double feature_scale = 0.05;
  std::string encoder_weights;
  int encoder_channels = 64;
  int encoder_hidden = 64;
};

enum class NormKind { Instance, Batch };

struct GeneratorConfig {
  int resolution = 64;
  int base_channels = 64;
  int min_channels = 16;
  int audio_dim = 256;
  int spade_hidden = 32;
  NormKind norm = NormKind::Instance;
};

struct DiscriminatorConfig {
  int frame_channels = 32;
  int temporal_channels = 32;
  int temporal_length = 5;
  int sync_resolution = 64;
  int sync_channels = 32;
  int sync_dim = 256;
};

struct LossConfig {
  double gan = 1.0;
  double fm = 10.0;
  double pl = 10.0;
  double rl = 50.0;
  double cl = 1.0;
  double tal = 1.0;
  double bl = 5.0;
  double margin = 1.0;
  std::string extractor_weights;
  std::uint64_t extractor_seed = 1234;
  int extractor_channels = 16;
  // false: blink loss is reported but does not backpropagate.
  bool blink_gradient = true;
};

struct TrainConfig {
  std::uint64_t seed = 7;
  int batch_size = 8;
  double lr = 0.002;
  double beta1 = 0.0;
  double beta2 = 0.90;
  int constant_epochs = 50;
  int decay_epochs = 100;
  int min_phase_epochs = 3;
  std::array<int, 3> max_phase_epochs{5, 5, 5};
  int plateau_window = 5;
  double plateau_rel_tol = 0.01;
  int identity_frame = 0;
  int samples_per_clip = 1;
  bool lr_restart_per_phase = false;
  int max_phase = 3;
  int sync_negative_min_offset = 8;
  double landmark_lr = 0.001;
};

struct AdaptConfigDefaults {
  int epochs = 5;
  double lr = 0.0002;
  std::string scope = "all_generator";
  int batch_size = 8;
};

struct Config {
  AudioConfig audio;
  GeneratorConfig gen;
  DiscriminatorConfig disc;
  LossConfig loss;
  TrainConfig train;
  AdaptConfigDefaults adapt;

  /// Throws Error(ConfigInvalid) naming the first offending key.
  void validate() const;
};

nlohmann::json to_json(const Config& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
void save_config(const Config& cfg, const std::filesystem::path& path);

/// Stable 64-bit FNV-1a over the canonical JSON dump; hex encoded.
std::string config_fingerprint(const Config& cfg);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t value);

}  // namespace a2v
