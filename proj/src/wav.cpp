#include "a2v/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "a2v/error.hpp"

namespace a2v {

namespace {

template <typename T>
T read_le(const std::string& bytes, std::size_t pos) {
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw Error(ErrorCode::Io, path.string() + " is not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int sample_rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw Error(ErrorCode::Io, path.string() + ": truncated chunk " + id);
    if (id == "fmt ") {
      const auto format = read_le<std::uint16_t>(bytes, body);
      const auto channels = read_le<std::uint16_t>(bytes, body + 2);
      sample_rate = static_cast<int>(read_le<std::uint32_t>(bytes, body + 4));
      const auto bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw Error(ErrorCode::Io, path.string() + ": expected 16-bit mono PCM");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(ErrorCode::Io, path.string() + ": data chunk before fmt");
      std::vector<float> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<float>(read_le<std::int16_t>(bytes, body + 2 * i)) / 32768.0f;
      }
      return Waveform(std::move(samples), sample_rate);
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorCode::Io, path.string() + ": no data chunk");
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(w.size());
  const std::uint32_t data_bytes = n * 2;
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate()) * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (float s : w.samples()) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(std::min(c * 32768.0f, 32767.0f))));
  }
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace a2v
