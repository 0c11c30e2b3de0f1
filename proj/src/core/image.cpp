#include "core/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fednod {

std::uint8_t gray_from_rgb(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  double v = std::floor(y + 0.5);
  if (v < 0.0) v = 0.0;
  if (v > 255.0) v = 255.0;
  return static_cast<std::uint8_t>(v);
}

ImageU8 grayscale(const std::vector<std::uint8_t>& r, const std::vector<std::uint8_t>& g,
                  const std::vector<std::uint8_t>& b, int height, int width) {
  const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (r.size() != n || g.size() != n || b.size() != n) {
    throw DimensionError("grayscale: plane sizes do not match " + std::to_string(height) +
                         "x" + std::to_string(width));
  }
  ImageU8 out;
  out.width = width;
  out.height = height;
  out.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.pixels[i] = gray_from_rgb(r[i], g[i], b[i]);
  return out;
}

ImageU8 resize_bilinear(const ImageU8& src, int out_width, int out_height) {
  if (out_width < 1 || out_height < 1) {
    throw ConfigError("resize: target dimensions must be >= 1, got " +
                      std::to_string(out_width) + "x" + std::to_string(out_height));
  }
  if (src.width < 1 || src.height < 1) {
    throw DimensionError("resize: empty source image");
  }
  if (out_width == src.width && out_height == src.height) return src;

  ImageU8 out;
  out.width = out_width;
  out.height = out_height;
  out.pixels.resize(static_cast<std::size_t>(out_width) * static_cast<std::size_t>(out_height));

  const double sx = static_cast<double>(src.width) / out_width;
  const double sy = static_cast<double>(src.height) / out_height;
  std::size_t o = 0;
  for (int y = 0; y < out_height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    if (fy < 0.0) fy = 0.0;
    int y0 = static_cast<int>(fy);
    if (y0 > src.height - 1) y0 = src.height - 1;
    int y1 = y0 + 1 < src.height ? y0 + 1 : src.height - 1;
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x, ++o) {
      double fx = (x + 0.5) * sx - 0.5;
      if (fx < 0.0) fx = 0.0;
      int x0 = static_cast<int>(fx);
      if (x0 > src.width - 1) x0 = src.width - 1;
      int x1 = x0 + 1 < src.width ? x0 + 1 : src.width - 1;
      const double wx = fx - x0;
      const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
      const double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
      double v = std::floor((1.0 - wy) * top + wy * bot + 0.5);
      if (v < 0.0) v = 0.0;
      if (v > 255.0) v = 255.0;
      out.pixels[o] = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

namespace {

// Skips PGM header whitespace and '#' comment lines; returns the next token.
bool next_token(const std::uint8_t* p, std::size_t len, std::size_t& pos, std::string& tok) {
  while (pos < len) {
    const char c = static_cast<char>(p[pos]);
    if (c == '#') {
      while (pos < len && p[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  tok.clear();
  while (pos < len) {
    const char c = static_cast<char>(p[pos]);
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
    tok.push_back(c);
    ++pos;
  }
  return !tok.empty();
}

long parse_header_int(const std::uint8_t* p, std::size_t len, std::size_t& pos,
                      const std::string& origin, const char* field) {
  std::string tok;
  if (!next_token(p, len, pos, tok)) {
    throw DataError(origin + ": truncated PGM header while reading " + field);
  }
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(origin + ": bad PGM " + std::string(field) + " '" + tok + "'");
  }
}

}  // namespace

ImageU8 parse_pgm(const std::uint8_t* bytes, std::size_t len, const std::string& origin) {
  if (len < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw DataError(origin + ": not a binary PGM (P5) file");
  }
  std::size_t pos = 2;
  const long w = parse_header_int(bytes, len, pos, origin, "width");
  const long h = parse_header_int(bytes, len, pos, origin, "height");
  const long maxval = parse_header_int(bytes, len, pos, origin, "maxval");
  if (w < 1 || h < 1) {
    throw DataError(origin + ": bad PGM dimensions " + std::to_string(w) + "x" +
                    std::to_string(h));
  }
  if (maxval != 255) {
    throw DataError(origin + ": PGM maxval " + std::to_string(maxval) +
                    " not supported (need 255)");
  }
  if (pos >= len) throw DataError(origin + ": truncated PGM, no pixel data");
  ++pos;  // single whitespace byte after maxval
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (len - pos < need) {
    throw DataError(origin + ": truncated PGM pixels: need " + std::to_string(need) +
                    " bytes, have " + std::to_string(len - pos));
  }
  ImageU8 img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.pixels.assign(bytes + pos, bytes + pos + need);
  return img;
}

ImageU8 read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_pgm(bytes.data(), bytes.size(), path);
}

void write_pgm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw IoError(path + ": write failed");
}

}  // namespace fednod
