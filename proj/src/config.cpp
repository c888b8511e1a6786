#include "a2v/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "a2v/error.hpp"

namespace a2v {

using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& section, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (section.contains(key)) out = section.at(key).get<T>();
}

void reject_unknown(const json& section, const std::string& name,
                    const std::set<std::string>& seen) {
  for (const auto& [key, _] : section.items()) {
    if (!seen.count(key)) {
      throw Error(ErrorCode::ConfigInvalid, "unknown key " + name + "." + key);
    }
  }
}

std::string norm_name(NormKind kind) { return kind == NormKind::Batch ? "batch" : "instance"; }

void require(bool ok, const std::string& key) {
  if (!ok) throw Error(ErrorCode::ConfigInvalid, "invalid value for " + key);
}

}  // namespace

nlohmann::json to_json(const Config& cfg) {
  json j;
  const auto& a = cfg.audio;
  j["audio"] = {{"sample_rate", a.sample_rate},       {"fps", a.fps},
                {"window_ms", a.window_ms},           {"n_mfcc", a.n_mfcc},
                {"hop_ms", a.hop_ms},                 {"analysis_ms", a.analysis_ms},
                {"n_mels", a.n_mels},                 {"n_fft", a.n_fft},
                {"feature_scale", a.feature_scale},   {"encoder_weights", a.encoder_weights},
                {"encoder_channels", a.encoder_channels}, {"encoder_hidden", a.encoder_hidden}};
  const auto& g = cfg.gen;
  j["gen"] = {{"resolution", g.resolution},     {"base_channels", g.base_channels},
              {"min_channels", g.min_channels}, {"audio_dim", g.audio_dim},
              {"spade_hidden", g.spade_hidden}, {"norm", norm_name(g.norm)}};
  const auto& d = cfg.disc;
  j["disc"] = {{"frame_channels", d.frame_channels},   {"temporal_channels", d.temporal_channels},
               {"temporal_length", d.temporal_length}, {"sync_resolution", d.sync_resolution},
               {"sync_channels", d.sync_channels},     {"sync_dim", d.sync_dim}};
  const auto& l = cfg.loss;
  j["loss"] = {{"gan", l.gan},
               {"fm", l.fm},
               {"pl", l.pl},
               {"rl", l.rl},
               {"cl", l.cl},
               {"tal", l.tal},
               {"bl", l.bl},
               {"margin", l.margin},
               {"extractor_weights", l.extractor_weights},
               {"extractor_seed", l.extractor_seed},
               {"extractor_channels", l.extractor_channels},
               {"blink_gradient", l.blink_gradient}};
  const auto& t = cfg.train;
  j["train"] = {{"seed", t.seed},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"constant_epochs", t.constant_epochs},
                {"decay_epochs", t.decay_epochs},
                {"min_phase_epochs", t.min_phase_epochs},
                {"max_phase_epochs", t.max_phase_epochs},
                {"plateau_window", t.plateau_window},
                {"plateau_rel_tol", t.plateau_rel_tol},
                {"identity_frame", t.identity_frame},
                {"samples_per_clip", t.samples_per_clip},
                {"lr_restart_per_phase", t.lr_restart_per_phase},
                {"max_phase", t.max_phase},
                {"sync_negative_min_offset", t.sync_negative_min_offset},
                {"landmark_lr", t.landmark_lr}};
  const auto& ad = cfg.adapt;
  j["adapt"] = {{"epochs", ad.epochs},
                {"lr", ad.lr},
                {"scope", ad.scope},
                {"batch_size", ad.batch_size}};
  return j;
}

Config config_from_json(const nlohmann::json& j) {
  Config cfg;
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "config root must be an object");
  static const std::set<std::string> sections{"audio", "gen", "disc", "loss", "train", "adapt"};
  for (const auto& [key, _] : j.items()) {
    if (!sections.count(key)) throw Error(ErrorCode::ConfigInvalid, "unknown section " + key);
  }
  try {
    std::set<std::string> seen;
    const json empty = json::object();
    const json& a = j.contains("audio") ? j.at("audio") : empty;
    read_key(a, "sample_rate", cfg.audio.sample_rate, seen);
    read_key(a, "fps", cfg.audio.fps, seen);
    read_key(a, "window_ms", cfg.audio.window_ms, seen);
    read_key(a, "n_mfcc", cfg.audio.n_mfcc, seen);
    read_key(a, "hop_ms", cfg.audio.hop_ms, seen);
    read_key(a, "analysis_ms", cfg.audio.analysis_ms, seen);
    read_key(a, "n_mels", cfg.audio.n_mels, seen);
    read_key(a, "n_fft", cfg.audio.n_fft, seen);
    read_key(a, "feature_scale", cfg.audio.feature_scale, seen);
    read_key(a, "encoder_weights", cfg.audio.encoder_weights, seen);
    read_key(a, "encoder_channels", cfg.audio.encoder_channels, seen);
    read_key(a, "encoder_hidden", cfg.audio.encoder_hidden, seen);
    reject_unknown(a, "audio", seen);

    seen.clear();
    const json& g = j.contains("gen") ? j.at("gen") : empty;
    read_key(g, "resolution", cfg.gen.resolution, seen);
    read_key(g, "base_channels", cfg.gen.base_channels, seen);
    read_key(g, "min_channels", cfg.gen.min_channels, seen);
    read_key(g, "audio_dim", cfg.gen.audio_dim, seen);
    read_key(g, "spade_hidden", cfg.gen.spade_hidden, seen);
    std::string norm = norm_name(cfg.gen.norm);
    read_key(g, "norm", norm, seen);
    if (norm == "instance") {
      cfg.gen.norm = NormKind::Instance;
    } else if (norm == "batch") {
      cfg.gen.norm = NormKind::Batch;
    } else {
      throw Error(ErrorCode::ConfigInvalid, "gen.norm must be instance or batch");
    }
    reject_unknown(g, "gen", seen);

    seen.clear();
    const json& d = j.contains("disc") ? j.at("disc") : empty;
    read_key(d, "frame_channels", cfg.disc.frame_channels, seen);
    read_key(d, "temporal_channels", cfg.disc.temporal_channels, seen);
    read_key(d, "temporal_length", cfg.disc.temporal_length, seen);
    read_key(d, "sync_resolution", cfg.disc.sync_resolution, seen);
    read_key(d, "sync_channels", cfg.disc.sync_channels, seen);
    read_key(d, "sync_dim", cfg.disc.sync_dim, seen);
    reject_unknown(d, "disc", seen);

    seen.clear();
    const json& l = j.contains("loss") ? j.at("loss") : empty;
    read_key(l, "gan", cfg.loss.gan, seen);
    read_key(l, "fm", cfg.loss.fm, seen);
    read_key(l, "pl", cfg.loss.pl, seen);
    read_key(l, "rl", cfg.loss.rl, seen);
    read_key(l, "cl", cfg.loss.cl, seen);
    read_key(l, "tal", cfg.loss.tal, seen);
    read_key(l, "bl", cfg.loss.bl, seen);
    read_key(l, "margin", cfg.loss.margin, seen);
    read_key(l, "extractor_weights", cfg.loss.extractor_weights, seen);
    read_key(l, "extractor_seed", cfg.loss.extractor_seed, seen);
    read_key(l, "extractor_channels", cfg.loss.extractor_channels, seen);
    read_key(l, "blink_gradient", cfg.loss.blink_gradient, seen);
    reject_unknown(l, "loss", seen);

    seen.clear();
    const json& t = j.contains("train") ? j.at("train") : empty;
    read_key(t, "seed", cfg.train.seed, seen);
    read_key(t, "batch_size", cfg.train.batch_size, seen);
    read_key(t, "lr", cfg.train.lr, seen);
    read_key(t, "beta1", cfg.train.beta1, seen);
    read_key(t, "beta2", cfg.train.beta2, seen);
    read_key(t, "constant_epochs", cfg.train.constant_epochs, seen);
    read_key(t, "decay_epochs", cfg.train.decay_epochs, seen);
    read_key(t, "min_phase_epochs", cfg.train.min_phase_epochs, seen);
    read_key(t, "max_phase_epochs", cfg.train.max_phase_epochs, seen);
    read_key(t, "plateau_window", cfg.train.plateau_window, seen);
    read_key(t, "plateau_rel_tol", cfg.train.plateau_rel_tol, seen);
    read_key(t, "identity_frame", cfg.train.identity_frame, seen);
    read_key(t, "samples_per_clip", cfg.train.samples_per_clip, seen);
    read_key(t, "lr_restart_per_phase", cfg.train.lr_restart_per_phase, seen);
    read_key(t, "max_phase", cfg.train.max_phase, seen);
    read_key(t, "sync_negative_min_offset", cfg.train.sync_negative_min_offset, seen);
    read_key(t, "landmark_lr", cfg.train.landmark_lr, seen);
    reject_unknown(t, "train", seen);

    seen.clear();
    const json& ad = j.contains("adapt") ? j.at("adapt") : empty;
    read_key(ad, "epochs", cfg.adapt.epochs, seen);
    read_key(ad, "lr", cfg.adapt.lr, seen);
    read_key(ad, "scope", cfg.adapt.scope, seen);
    read_key(ad, "batch_size", cfg.adapt.batch_size, seen);
    reject_unknown(ad, "adapt", seen);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  cfg.validate();
  return cfg;
}

void Config::validate() const {
  require(audio.sample_rate > 0, "audio.sample_rate");
  require(audio.fps > 0, "audio.fps");
  require(audio.window_ms > 0, "audio.window_ms");
  require(audio.n_mfcc > 0 && audio.n_mfcc <= audio.n_mels, "audio.n_mfcc");
  require(audio.hop_ms > 0, "audio.hop_ms");
  require(audio.analysis_ms > 0, "audio.analysis_ms");
  require(audio.n_fft >= audio.analysis_ms * audio.sample_rate / 1000, "audio.n_fft");
  require(std::isfinite(audio.feature_scale) && audio.feature_scale > 0, "audio.feature_scale");
  require(audio.encoder_channels > 0 && audio.encoder_hidden > 0, "audio.encoder_channels");

  const int res = gen.resolution;
  require(res >= 64 && res <= 256 && (res & (res - 1)) == 0, "gen.resolution");
  require(gen.base_channels > 0 && gen.min_channels > 0, "gen.base_channels");
  require(gen.audio_dim > 0, "gen.audio_dim");
  require(gen.spade_hidden > 0, "gen.spade_hidden");

  require(disc.frame_channels > 0 && disc.temporal_channels > 0, "disc.frame_channels");
  require(disc.temporal_length >= 2, "disc.temporal_length");
  require(disc.sync_resolution >= 16, "disc.sync_resolution");
  require(disc.sync_channels > 0 && disc.sync_dim > 0, "disc.sync_channels");

  for (double w : {loss.gan, loss.fm, loss.pl, loss.rl, loss.cl, loss.tal, loss.bl}) {
    require(std::isfinite(w) && w >= 0.0, "loss.*");
  }
  require(std::isfinite(loss.margin) && loss.margin > 0.0, "loss.margin");
  require(loss.extractor_channels > 0, "loss.extractor_channels");

  require(train.batch_size > 0, "train.batch_size");
  require(train.lr > 0, "train.lr");
  require(train.beta1 >= 0 && train.beta1 < 1, "train.beta1");
  require(train.beta2 >= 0 && train.beta2 < 1, "train.beta2");
  require(train.constant_epochs >= 0 && train.decay_epochs > 0, "train.constant_epochs");
  require(train.min_phase_epochs >= 1, "train.min_phase_epochs");
  for (int m : train.max_phase_epochs) require(m >= 1, "train.max_phase_epochs");
  require(train.plateau_window >= 1, "train.plateau_window");
  require(train.plateau_rel_tol >= 0, "train.plateau_rel_tol");
  require(train.identity_frame >= 0, "train.identity_frame");
  require(train.samples_per_clip >= 1, "train.samples_per_clip");
  require(train.max_phase >= 1 && train.max_phase <= 3, "train.max_phase");
  require(train.sync_negative_min_offset >= 1, "train.sync_negative_min_offset");
  require(train.landmark_lr > 0, "train.landmark_lr");

  require(adapt.epochs >= 0, "adapt.epochs");
  require(adapt.lr > 0, "adapt.lr");
  require(adapt.scope == "all_generator" || adapt.scope == "modulation_only", "adapt.scope");
  require(adapt.batch_size > 0, "adapt.batch_size");
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const Config& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(cfg).dump(2) << "\n";
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string config_fingerprint(const Config& cfg) { return to_hex(fnv1a64(to_json(cfg).dump())); }

}  // namespace a2v
