#pragma once

// FDT1 tensor dump:
//   "FDT1" | u32 grid_h | u32 grid_w | u32 channels | u32 keep_y | u32 keep_cb
//   | u32 keep_cr | f32[channels][grid_h][grid_w]      (all little-endian)

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "fun/binary_io.hpp"
#include "fun/dct_codec.hpp"

namespace fun {

inline constexpr char kFdtMagic[4] = {'F', 'D', 'T', '1'};

inline void write_fdt1(std::ostream& os, const DctTensor& t) {
  os.write(kFdtMagic, 4);
  io::write_u32(os, static_cast<std::uint32_t>(t.grid_h));
  io::write_u32(os, static_cast<std::uint32_t>(t.grid_w));
  io::write_u32(os, static_cast<std::uint32_t>(t.channels));
  io::write_u32(os, static_cast<std::uint32_t>(t.spec.keep_y));
  io::write_u32(os, static_cast<std::uint32_t>(t.spec.keep_cb));
  io::write_u32(os, static_cast<std::uint32_t>(t.spec.keep_cr));
  for (float v : t.data) io::write_f32(os, v);
}

inline DctTensor read_fdt1(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kFdtMagic)) {
    fail(ErrorKind::io, "not an FDT1 stream");
  }
  DctTensor t;
  t.grid_h = static_cast<int>(io::read_u32(is, "FDT1 header"));
  t.grid_w = static_cast<int>(io::read_u32(is, "FDT1 header"));
  t.channels = static_cast<int>(io::read_u32(is, "FDT1 header"));
  t.spec.keep_y = static_cast<int>(io::read_u32(is, "FDT1 header"));
  t.spec.keep_cb = static_cast<int>(io::read_u32(is, "FDT1 header"));
  t.spec.keep_cr = static_cast<int>(io::read_u32(is, "FDT1 header"));
  t.spec.validate();
  require(t.channels == t.spec.channels(), ErrorKind::io, "FDT1 channel count disagrees with keep-counts");
  t.data.resize(std::size_t(t.channels) * t.grid_h * t.grid_w);
  for (float& v : t.data) v = io::read_f32(is, "FDT1 payload");
  return t;
}

inline void save_fdt1(const std::filesystem::path& path, const DctTensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot write " + path.string());
  write_fdt1(f, t);
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

inline DctTensor load_fdt1(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string());
  return read_fdt1(f);
}

}  // namespace fun
