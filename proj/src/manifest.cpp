#include "a2v/manifest.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "a2v/audio.hpp"
#include "a2v/image.hpp"
#include "a2v/wav.hpp"

namespace a2v {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void validate(ClipManifestEntry& e) {
  if (e.fps <= 0) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
  if (!e.aligned) throw Error(ErrorCode::InvalidArgument, "entry is not marked as aligned");
  if (!std::filesystem::is_directory(e.frames_path)) {
    throw Error(ErrorCode::MissingFile, "frame directory " + e.frames_path.string() + " does not exist");
  }
  if (!std::filesystem::is_regular_file(e.audio_path)) {
    throw Error(ErrorCode::MissingFile, "audio file " + e.audio_path.string() + " does not exist");
  }
  if (e.landmarks_path && !std::filesystem::is_regular_file(*e.landmarks_path)) {
    throw Error(ErrorCode::MissingFile, "landmark file " + e.landmarks_path->string() + " does not exist");
  }
  const auto frames = list_frames(e.frames_path);
  e.frame_count = static_cast<int>(frames.size());
  const Waveform w = read_wav(e.audio_path);
  const auto expected = frame_count_for(w.size(), w.sample_rate(), e.fps);
  if (std::llabs(expected - e.frame_count) > 1) {
    throw Error(ErrorCode::FrameAudioMismatch, std::to_string(e.frame_count) + " frames but audio spans " +
                                                   std::to_string(expected));
  }
  if (e.identity_frame < 0 || e.identity_frame >= e.frame_count) {
    throw Error(ErrorCode::InvalidArgument, "identity_frame out of range");
  }
  if (e.landmarks_path) {
    const auto rows = read_landmarks(*e.landmarks_path);
    if (static_cast<int>(rows.size()) != e.frame_count) {
      throw Error(ErrorCode::CountMismatch, std::to_string(rows.size()) + " landmark rows for " +
                                                std::to_string(e.frame_count) + " frames");
    }
  }
}

}  // namespace

ManifestReport load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  ManifestReport report;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ClipManifestEntry e;
    try {
      const json j = json::parse(line);
      e.clip_id = j.at("clip_id").get<std::string>();
      e.frames_path = resolve(base, j.at("frames_path").get<std::string>());
      e.audio_path = resolve(base, j.at("audio_path").get<std::string>());
      e.fps = j.value("fps", 25);
      if (j.contains("landmarks_path") && !j.at("landmarks_path").is_null()) {
        e.landmarks_path = resolve(base, j.at("landmarks_path").get<std::string>());
      }
      e.identity_frame = j.value("identity_frame", 0);
      e.aligned = j.value("aligned", true);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::ManifestSyntax, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    try {
      validate(e);
      report.entries.push_back(std::move(e));
    } catch (const Error& err) {
      report.issues.push_back({line_no, e.clip_id, err.code(), err.what()});
    }
  }
  return report;
}

void write_manifest(const std::vector<ClipManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& e : entries) {
    json j = {{"clip_id", e.clip_id},
              {"frames_path", e.frames_path.generic_string()},
              {"audio_path", e.audio_path.generic_string()},
              {"fps", e.fps},
              {"identity_frame", e.identity_frame},
              {"aligned", e.aligned}};
    j["landmarks_path"] = e.landmarks_path ? json(e.landmarks_path->generic_string()) : json(nullptr);
    out << j.dump() << "\n";
  }
}

std::vector<EyeLandmarks> read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::vector<EyeLandmarks> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::array<double, 24> v{};
    for (auto& x : v) {
      if (!(ss >> x) || !std::isfinite(x)) {
        throw Error(ErrorCode::ManifestSyntax, path.string() + ": expected 24 numbers per line");
      }
    }
    double extra;
    if (ss >> extra) throw Error(ErrorCode::ManifestSyntax, path.string() + ": more than 24 numbers on a line");
    EyeLandmarks lm;
    for (int i = 0; i < 6; ++i) {
      lm.left[static_cast<std::size_t>(i)] = {v[static_cast<std::size_t>(2 * i)], v[static_cast<std::size_t>(2 * i + 1)]};
      lm.right[static_cast<std::size_t>(i)] = {v[static_cast<std::size_t>(12 + 2 * i)],
                                               v[static_cast<std::size_t>(13 + 2 * i)]};
    }
    rows.push_back(lm);
  }
  return rows;
}

void write_landmarks(const std::vector<EyeLandmarks>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  char buf[64];
  for (const auto& lm : rows) {
    bool first = true;
    for (const auto* eye : {&lm.left, &lm.right}) {
      for (const auto& p : *eye) {
        std::snprintf(buf, sizeof(buf), "%s%.4f %.4f", first ? "" : " ", p.x, p.y);
        out << buf;
        first = false;
      }
    }
    out << "\n";
  }
}

}  // namespace a2v
