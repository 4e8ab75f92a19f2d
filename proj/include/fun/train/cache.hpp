#pragma once

// DCT preprocessing with an optional on-disk FDT1 cache keyed by content hash.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fun/binary_io.hpp"
#include "fun/fdt_format.hpp"
#include "fun/train/dataset.hpp"

namespace fun::train {

inline std::uint64_t cache_key(const RgbImage& img, const CompressionSpec& spec) {
  std::uint32_t head[5] = {std::uint32_t(img.height), std::uint32_t(img.width), std::uint32_t(spec.keep_y),
                           std::uint32_t(spec.keep_cb), std::uint32_t(spec.keep_cr)};
  std::uint64_t h = io::fnv1a(head, sizeof head);
  return io::fnv1a(img.data.data(), img.data.size(), h);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline DctTensor preprocess_cached(const RgbImage& img, const CompressionSpec& spec,
                                   const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return preprocess(img, spec);
  const auto file = cache_dir / (hex64(cache_key(img, spec)) + ".fdt");
  if (std::filesystem::exists(file)) {
    DctTensor t = load_fdt1(file);
    if (t.spec == spec && t.grid_h * kBlock == img.height && t.grid_w * kBlock == img.width) return t;
  }
  DctTensor t = preprocess(img, spec);
  std::filesystem::create_directories(cache_dir);
  save_fdt1(file, t);
  return t;
}

inline std::vector<DctTensor> preprocess_all(const std::vector<Sample>& items, const CompressionSpec& spec,
                                             const std::filesystem::path& cache_dir = {}) {
  std::vector<DctTensor> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(preprocess_cached(s.image, spec, cache_dir));
  return out;
}

inline std::vector<int> labels_of(const std::vector<Sample>& items) {
  std::vector<int> l;
  l.reserve(items.size());
  for (const auto& s : items) l.push_back(s.label);
  return l;
}

}  // namespace fun::train
