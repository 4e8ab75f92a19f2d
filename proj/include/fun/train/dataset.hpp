#pragma once

// Labeled image sets: class-per-directory PPM folders and a synthetic
// frequency-band task.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "fun/dct_codec.hpp"
#include "fun/image_io.hpp"
#include "fun/nn/ops.hpp"

namespace fun::train {

struct Sample {
  RgbImage image;
  int label = 0;
};

struct Dataset {
  std::string source;
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

namespace detail {

inline std::vector<Sample> load_class_dirs(const std::filesystem::path& root, std::vector<std::string>& names) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorKind::dataset, "dataset directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  require(!dirs.empty(), ErrorKind::dataset, "no class directories under " + root.string());
  std::vector<std::string> found;
  std::vector<Sample> items;
  for (std::size_t label = 0; label < dirs.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dirs[label]))
      if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorKind::dataset, "empty class directory: " + dirs[label].string());
    found.push_back(dirs[label].filename().string());
    for (const auto& f : files) {
      Sample s;
      try {
        s.image = read_ppm(f);
        s.image.validate();
      } catch (const Error& e) {
        throw Error(e.kind(), f.string() + ": " + e.what());
      }
      s.label = int(label);
      items.push_back(std::move(s));
    }
  }
  if (names.empty()) {
    names = found;
  } else {
    require(names == found, ErrorKind::dataset, "train and test class directories differ under " + root.string());
  }
  return items;
}

}  // namespace detail

// DIR/train and DIR/test when both exist, otherwise DIR serves both splits.
inline Dataset load_folder_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Dataset d;
  d.source = dir.string();
  if (fs::is_directory(dir / "train") && fs::is_directory(dir / "test")) {
    d.train = detail::load_class_dirs(dir / "train", d.class_names);
    d.test = detail::load_class_dirs(dir / "test", d.class_names);
  } else {
    d.train = detail::load_class_dirs(dir, d.class_names);
    d.test = d.train;
  }
  d.num_classes = int(d.class_names.size());
  return d;
}

// Class k: a 2-D cosine whose block frequency (u, v) lies on the diagonal
// band u + v = 2k + 1, with random amplitude, phase and additive noise,
// rendered as a grayscale RGB image. Labels cycle 0..K-1.
struct SynthOptions {
  double amp_lo = 30.0;
  double amp_hi = 60.0;
  double noise = 10.0;
};

inline std::vector<Sample> synth_freq_samples(int n, int num_classes, std::uint64_t seed, int size,
                                              const SynthOptions& opt = {}) {
  require(num_classes >= 1 && num_classes <= 8, ErrorKind::dataset, "synthetic task supports 1..8 classes");
  require(n >= 0, ErrorKind::dataset, "negative sample count");
  nn::Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(std::size_t(n));
  const double pi = std::numbers::pi;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.label = i % num_classes;
    const int band = 2 * s.label + 1;
    const int lo = std::max(0, band - (kBlock - 1)), hi = std::min(band, kBlock - 1);
    const int u = lo + int(rng.next() % std::uint64_t(hi - lo + 1));
    const int v = band - u;
    const double amp = rng.uniform(opt.amp_lo, opt.amp_hi);
    // A zero frequency gets no phase, otherwise cos(phase) could erase the pattern.
    double phx = rng.uniform(0.0, 2.0 * pi), phy = rng.uniform(0.0, 2.0 * pi);
    if (u == 0) phx = 0.0;
    if (v == 0) phy = 0.0;
    s.image = RgbImage(size, size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double val = 128.0 + amp * std::cos(pi * u * c / kBlock + phx) * std::cos(pi * v * r / kBlock + phy) +
                           rng.normal(0.0, opt.noise);
        const auto px = std::uint8_t(std::lround(std::clamp(val, 0.0, 255.0)));
        std::uint8_t* p = s.image.pixel(r, c);
        p[0] = p[1] = p[2] = px;
      }
    out.push_back(std::move(s));
  }
  return out;
}

inline Dataset synth_freq_dataset(int n_train, int n_test, int num_classes, std::uint64_t seed, int size = 224,
                                  const SynthOptions& opt = {}) {
  require(size > 0 && size % 16 == 0, ErrorKind::dataset, "synthetic image size must be a multiple of 16");
  Dataset d;
  d.source = "synth";
  d.num_classes = num_classes;
  for (int k = 0; k < num_classes; ++k) d.class_names.push_back("band" + std::to_string(2 * k + 1));
  d.train = synth_freq_samples(n_train, num_classes, seed, size, opt);
  d.test = synth_freq_samples(n_test, num_classes, seed ^ 0x5bd1e995ULL, size, opt);
  return d;
}

}  // namespace fun::train
