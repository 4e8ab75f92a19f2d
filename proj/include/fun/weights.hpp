#pragma once

// Weights file: a line-oriented text header followed by every parameter and
// batch-norm running statistic as little-endian f32 in declaration order.
//
//   fun-weights 1
//   seed 1
//   front none
//   compression 64/64/64
//   arch 8
//   <8 architecture lines>
//   norm-mean m0 m1 ...
//   norm-std s0 s1 ...
//   values 770572
//   data
//   <values * 4 bytes>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fun/arch/lefun.hpp"
#include "fun/binary_io.hpp"

namespace fun {

inline constexpr int kWeightsVersion = 1;

struct WeightsHeader {
  int version = kWeightsVersion;
  std::uint64_t seed = 0;
  arch::FrontKind front = arch::FrontKind::none;
  CompressionSpec compression;
  arch::ArchSpec arch;
  arch::InputNorm norm;
  std::uint64_t values = 0;
};

// A loaded network: either a DCT-input model or a learnable-front model.
struct LoadedWeights {
  WeightsHeader header;
  std::unique_ptr<arch::Model<float>> model;
  std::unique_ptr<arch::LeFunModel<float>> lefun;

  arch::Model<float>& body() { return lefun ? lefun->body() : *model; }
};

namespace detail {

inline std::string format_floats(const std::vector<float>& v) {
  std::string s;
  char buf[32];
  for (float f : v) {
    std::snprintf(buf, sizeof buf, " %.9g", double(f));
    s += buf;
  }
  return s;
}

inline void write_header(std::ostream& os, const WeightsHeader& h) {
  const std::string arch_text = arch::arch_to_string(h.arch);
  int arch_lines = 0;
  for (char c : arch_text) arch_lines += c == '\n';
  os << "fun-weights " << h.version << "\n";
  os << "seed " << h.seed << "\n";
  os << "front " << arch::to_string(h.front) << "\n";
  os << "compression " << h.compression.to_string() << "\n";
  os << "arch " << arch_lines << "\n" << arch_text;
  os << "norm-mean" << format_floats(h.norm.mean) << "\n";
  os << "norm-std" << format_floats(h.norm.stddev) << "\n";
  os << "values " << h.values << "\n";
  os << "data\n";
}

inline std::vector<float> parse_floats(std::istringstream& ls) {
  std::vector<float> v;
  std::string tok;
  while (ls >> tok) {
    try {
      v.push_back(std::stof(tok));
    } catch (const std::exception&) {
      fail(ErrorKind::io, "bad number '" + tok + "' in weights header");
    }
  }
  return v;
}

inline WeightsHeader read_header(std::istream& is) {
  WeightsHeader h;
  std::string line;
  auto next = [&](const char* key) {
    if (!std::getline(is, line)) fail(ErrorKind::io, std::string("weights header truncated before '") + key + "'");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) fail(ErrorKind::io, std::string("weights header: expected '") + key + "', got '" + line + "'");
    return ls;
  };
  {
    auto ls = next("fun-weights");
    ls >> h.version;
    require(h.version == kWeightsVersion, ErrorKind::io, "unsupported weights version " + std::to_string(h.version));
  }
  next("seed") >> h.seed;
  {
    std::string f;
    next("front") >> f;
    h.front = arch::parse_front_kind(f);
  }
  {
    std::string c;
    next("compression") >> c;
    h.compression = CompressionSpec::parse(c);
  }
  int arch_lines = 0;
  next("arch") >> arch_lines;
  std::string arch_text;
  for (int i = 0; i < arch_lines; ++i) {
    if (!std::getline(is, line)) fail(ErrorKind::io, "weights header truncated inside arch");
    arch_text += line + "\n";
  }
  h.arch = arch::arch_from_string(arch_text);
  {
    auto ls = next("norm-mean");
    h.norm.mean = parse_floats(ls);
  }
  {
    auto ls = next("norm-std");
    h.norm.stddev = parse_floats(ls);
  }
  next("values") >> h.values;
  next("data");
  return h;
}

template <class T>
std::uint64_t count_values(const nn::StateList<T>& state) {
  std::uint64_t n = 0;
  for (const auto& e : state) n += e.tensor->size();
  return n;
}

inline void write_blob(std::ostream& os, const nn::StateList<float>& state) {
  for (const auto& e : state)
    for (float v : e.tensor->data()) io::write_f32(os, v);
}

inline void read_blob(std::istream& is, const nn::StateList<float>& state) {
  for (const auto& e : state)
    for (float& v : e.tensor->data()) v = io::read_f32(is, "weights payload (" + e.name + ")");
  if (is.peek() != std::char_traits<char>::eof()) fail(ErrorKind::io, "trailing bytes after weights payload");
}

}  // namespace detail

inline void write_weights(std::ostream& os, arch::Model<float>& model, std::uint64_t seed,
                          const CompressionSpec& compression = CompressionSpec::full()) {
  auto state = model.state();
  WeightsHeader h{kWeightsVersion, seed, arch::FrontKind::none, compression, model.spec(), model.norm(),
                  detail::count_values(state)};
  detail::write_header(os, h);
  detail::write_blob(os, state);
}

inline void write_weights(std::ostream& os, arch::LeFunModel<float>& model, std::uint64_t seed,
                          const CompressionSpec& compression = CompressionSpec::full()) {
  auto state = model.state();
  WeightsHeader h{kWeightsVersion, seed,          model.front().kind(), compression, model.body().spec(),
                  model.body().norm(), detail::count_values(state)};
  detail::write_header(os, h);
  detail::write_blob(os, state);
}

inline LoadedWeights read_weights(std::istream& is) {
  LoadedWeights w;
  w.header = detail::read_header(is);
  const auto& h = w.header;
  nn::StateList<float> state;
  if (h.front == arch::FrontKind::none) {
    w.model = std::make_unique<arch::Model<float>>(h.arch, h.seed);
    state = w.model->state();
  } else {
    w.lefun = std::make_unique<arch::LeFunModel<float>>(h.arch, h.front, h.seed);
    state = w.lefun->state();
  }
  require(detail::count_values(state) == h.values, ErrorKind::io,
          "weights header declares " + std::to_string(h.values) + " values, architecture needs " +
              std::to_string(detail::count_values(state)));
  w.body().set_norm(h.norm);
  detail::read_blob(is, state);
  return w;
}

template <class M>
void save_weights(const std::filesystem::path& path, M& model, std::uint64_t seed,
                  const CompressionSpec& compression = CompressionSpec::full()) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot write " + path.string());
  write_weights(f, model, seed, compression);
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

inline LoadedWeights load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string());
  return read_weights(f);
}

}  // namespace fun
