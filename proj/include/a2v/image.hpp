#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace a2v {

/// 8-bit interleaved image, row-major, `channels` of 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

/// Binary netpbm: P6 for RGB, P5 for gray.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const Image& img, const std::filesystem::path& path);

/// Numbered frame files ("000000.ppm", ...) in `dir`, sorted.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);
std::filesystem::path frame_path(const std::filesystem::path& dir, int index);

/// ITU-R BT.601 luma as doubles in [0, 255], row-major.
std::vector<double> to_gray(const Image& img);

}  // namespace a2v
