#include "a2v/video.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "a2v/error.hpp"
#include "a2v/wav.hpp"

namespace a2v {

namespace {

void replace_all(std::string& s, const std::string& key, const std::string& value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
}

}  // namespace

VideoDescriptor assemble_video(const std::vector<Image>& frames, const Waveform& audio, int fps,
                               const std::filesystem::path& out_dir, const std::string& mux_command) {
  const auto expected = frame_count_for(audio.size(), audio.sample_rate(), fps);
  if (static_cast<std::int64_t>(frames.size()) != expected) {
    throw Error(ErrorCode::CountMismatch, std::to_string(frames.size()) + " frames for " +
                                              std::to_string(audio.duration_s()) + " s of audio at " +
                                              std::to_string(fps) + " fps (expected " + std::to_string(expected) +
                                              ")");
  }
  const auto frames_dir = out_dir / "frames";
  std::filesystem::create_directories(frames_dir);
  for (std::size_t i = 0; i < frames.size(); ++i) write_pnm(frames[i], frame_path(frames_dir, static_cast<int>(i)));
  write_wav(audio, out_dir / "audio.wav");

  VideoDescriptor d{fps, static_cast<int>(frames.size()), audio.duration_s(), "frames", "audio.wav"};
  nlohmann::json j = {{"fps", d.fps},
                      {"frame_count", d.frame_count},
                      {"duration_s", d.duration_s},
                      {"frames_dir", d.frames_dir},
                      {"audio", d.audio}};
  std::ofstream out(out_dir / "video.json");
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::Io, "cannot write " + (out_dir / "video.json").string());
  out.close();

  if (!mux_command.empty()) {
    std::string cmd = mux_command;
    replace_all(cmd, "{frames}", (frames_dir / "%06d.ppm").string());
    replace_all(cmd, "{audio}", (out_dir / "audio.wav").string());
    replace_all(cmd, "{fps}", std::to_string(fps));
    replace_all(cmd, "{out}", out_dir.string());
    if (std::system(cmd.c_str()) != 0) throw Error(ErrorCode::Io, "mux command failed: " + cmd);
  }
  return d;
}

VideoDescriptor read_video_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return {j.at("fps").get<int>(), j.at("frame_count").get<int>(), j.at("duration_s").get<double>(),
            j.at("frames_dir").get<std::string>(), j.at("audio").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptArchive, path.string() + ": " + e.what());
  }
}

}  // namespace a2v
