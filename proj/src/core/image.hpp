#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace fednod {

// 8-bit grayscale image, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

// BT.601 luminance, rounded half-up and clamped to [0, 255].
std::uint8_t gray_from_rgb(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Planar RGB (3 x H x W) to grayscale.
ImageU8 grayscale(const std::vector<std::uint8_t>& r, const std::vector<std::uint8_t>& g,
                  const std::vector<std::uint8_t>& b, int height, int width);

// Bilinear resize with half-pixel centers; same-size input is returned
// bit-identically. Rounds half-up to bytes.
ImageU8 resize_bilinear(const ImageU8& src, int out_width, int out_height);

// Binary PGM (P5), maxval 255. Reads tolerate comments and arbitrary
// whitespace in the header; writes use the canonical three-line header.
ImageU8 read_pgm(const std::string& path);
ImageU8 parse_pgm(const std::uint8_t* bytes, std::size_t len, const std::string& origin);
void write_pgm(const std::string& path, const ImageU8& img);

}  // namespace fednod
