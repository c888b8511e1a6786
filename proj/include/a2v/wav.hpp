#pragma once

#include <filesystem>

#include "a2v/audio.hpp"

namespace a2v {

/// 16-bit signed PCM, mono. Other layouts are rejected.
Waveform read_wav(const std::filesystem::path& path);
/// Clamps to [-1, 1] and quantizes to 16-bit.
void write_wav(const Waveform& w, const std::filesystem::path& path);

}  // namespace a2v
