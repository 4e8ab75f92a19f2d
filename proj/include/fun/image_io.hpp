#pragma once

// Binary PPM (P6) / PGM (P5) readers and writers, maxval 255 only.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fun/dct_codec.hpp"
#include "fun/errors.hpp"

namespace fun {

namespace detail {

inline int read_header_int(std::istream& is, const std::string& path) {
  int ch = is.peek();
  while (ch != EOF) {
    if (std::isspace(ch)) {
      is.get();
    } else if (ch == '#') {
      std::string line;
      std::getline(is, line);
    } else {
      break;
    }
    ch = is.peek();
  }
  int v = -1;
  if (!(is >> v) || v < 0) fail(ErrorKind::io, "malformed PNM header: " + path);
  return v;
}

inline std::vector<std::uint8_t> read_pnm(const std::filesystem::path& path, const char* magic,
                                          int samples, int& h, int& w) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string());
  std::string m(2, '\0');
  f.read(m.data(), 2);
  if (!f || m != magic) {
    fail(ErrorKind::io, path.string() + ": expected " + magic + " image");
  }
  w = read_header_int(f, path.string());
  h = read_header_int(f, path.string());
  int maxval = read_header_int(f, path.string());
  if (maxval != 255) fail(ErrorKind::io, path.string() + ": only maxval 255 is supported");
  f.get();  // single whitespace before raster
  std::vector<std::uint8_t> data(std::size_t(h) * w * samples);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) fail(ErrorKind::io, path.string() + ": truncated raster");
  return data;
}

inline void write_pnm(const std::filesystem::path& path, const char* magic, int h, int w,
                      const std::uint8_t* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot write " + path.string());
  f << magic << "\n" << w << " " << h << "\n255\n";
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

}  // namespace detail

inline RgbImage read_ppm(const std::filesystem::path& path) {
  RgbImage img;
  img.data = detail::read_pnm(path, "P6", 3, img.height, img.width);
  return img;
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  detail::write_pnm(path, "P6", img.height, img.width, img.data.data(), img.data.size());
}

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;
};

inline GrayImage read_pgm(const std::filesystem::path& path) {
  GrayImage img;
  img.data = detail::read_pnm(path, "P5", 1, img.height, img.width);
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  detail::write_pnm(path, "P5", img.height, img.width, img.data.data(), img.data.size());
}

}  // namespace fun
