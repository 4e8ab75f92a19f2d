#pragma once

// JPEG-style frequency-domain preprocessing: RGB -> YCbCr 4:2:0 -> 8x8
// orthonormal DCT -> zigzag channels -> chroma grid upsample -> stacking.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fun/errors.hpp"

namespace fun {

inline constexpr int kBlock = 8;
inline constexpr int kBlockArea = 64;
inline constexpr int kPlanes = 3;
inline constexpr int kFullChannels = kPlanes * kBlockArea;

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // interleaved R,G,B, row-major

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), data(std::size_t(h) * w * 3, 0) {}

  std::uint8_t* pixel(int r, int c) { return &data[(std::size_t(r) * width + c) * 3]; }
  const std::uint8_t* pixel(int r, int c) const {
    return &data[(std::size_t(r) * width + c) * 3];
  }

  void validate() const {
    require(height > 0 && width > 0 && height % 16 == 0 && width % 16 == 0,
            ErrorKind::dimension,
            "image dimensions must be positive multiples of 16, got " +
                std::to_string(height) + "x" + std::to_string(width));
    require(data.size() == std::size_t(height) * width * 3, ErrorKind::dimension,
            "image buffer length does not match height*width*3");
  }
};

struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0)
      : height(h), width(w), data(std::size_t(h) * w, fill) {}

  double& at(int r, int c) { return data[std::size_t(r) * width + c]; }
  double at(int r, int c) const { return data[std::size_t(r) * width + c]; }
};

struct PlaneSet {
  Plane y;
  Plane cb;  // (H/2) x (W/2)
  Plane cr;

  const Plane& plane(int i) const { return i == 0 ? y : (i == 1 ? cb : cr); }
  Plane& plane(int i) { return i == 0 ? y : (i == 1 ? cb : cr); }
};

struct CompressionSpec {
  int keep_y = kBlockArea;
  int keep_cb = kBlockArea;
  int keep_cr = kBlockArea;

  static CompressionSpec full() { return {}; }

  int keep(int plane) const { return plane == 0 ? keep_y : (plane == 1 ? keep_cb : keep_cr); }
  int channels() const { return keep_y + keep_cb + keep_cr; }
  bool is_full() const { return channels() == kFullChannels; }

  void validate() const {
    for (int p = 0; p < kPlanes; ++p) {
      require(keep(p) >= 0 && keep(p) <= kBlockArea, ErrorKind::spec,
              "keep-count out of range [0,64]: " + to_string());
    }
  }

  std::string to_string(char sep = '/') const {
    std::ostringstream os;
    os << keep_y << sep << keep_cb << sep << keep_cr;
    return os.str();
  }

  // Accepts "Y,CB,CR" or "Y/CB/CR".
  static CompressionSpec parse(const std::string& text) {
    CompressionSpec s;
    int* fields[3] = {&s.keep_y, &s.keep_cb, &s.keep_cr};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
      std::size_t end = text.find_first_of(",/", pos);
      if ((i < 2) != (end != std::string::npos)) {
        fail(ErrorKind::spec, "expected Y,CB,CR keep-counts, got '" + text + "'");
      }
      std::string tok = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
      try {
        std::size_t used = 0;
        *fields[i] = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorKind::spec, "bad keep-count '" + tok + "' in '" + text + "'");
      }
      pos = end + 1;
    }
    s.validate();
    return s;
  }

  friend bool operator==(const CompressionSpec&, const CompressionSpec&) = default;
};

// Frequency-domain tensor, layout [channel][grid row][grid col]; channels
// are grouped Y, Cb, Cr and zigzag-ordered within each group.
struct DctTensor {
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;
  CompressionSpec spec;
  std::vector<float> data;

  DctTensor() = default;
  DctTensor(int gh, int gw, const CompressionSpec& s)
      : grid_h(gh), grid_w(gw), channels(s.channels()), spec(s),
        data(std::size_t(s.channels()) * gh * gw, 0.0f) {}

  std::size_t plane_size() const { return std::size_t(grid_h) * grid_w; }
  float& at(int c, int r, int col) { return data[(std::size_t(c) * grid_h + r) * grid_w + col]; }
  float at(int c, int r, int col) const {
    return data[(std::size_t(c) * grid_h + r) * grid_w + col];
  }
  // First channel index of a plane group.
  int group_offset(int plane) const {
    int off = 0;
    for (int p = 0; p < plane; ++p) off += spec.keep(p);
    return off;
  }

  friend bool operator==(const DctTensor&, const DctTensor&) = default;
};

namespace detail {

struct CosineTable {
  // table[k][i] = alpha(k) * cos((2i+1) k pi / 16)
  std::array<std::array<double, kBlock>, kBlock> v{};
  CosineTable() {
    for (int k = 0; k < kBlock; ++k) {
      double alpha = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int i = 0; i < kBlock; ++i) {
        v[k][i] = alpha * std::cos((2 * i + 1) * k * std::numbers::pi / (2.0 * kBlock));
      }
    }
  }
};

inline const CosineTable& cosines() {
  static const CosineTable table;
  return table;
}

inline double clamp255(double v) { return std::clamp(v, 0.0, 255.0); }

}  // namespace detail

using Block8 = std::array<double, kBlockArea>;  // row-major 8x8

// Orthonormal type-II 2-D DCT of (block - 128).
inline Block8 block_dct8(const Block8& block) {
  const auto& t = detail::cosines().v;
  Block8 rows{};  // 1-D DCT along each row
  for (int i = 0; i < kBlock; ++i) {
    for (int l = 0; l < kBlock; ++l) {
      double s = 0.0;
      for (int j = 0; j < kBlock; ++j) s += (block[i * kBlock + j] - 128.0) * t[l][j];
      rows[i * kBlock + l] = s;
    }
  }
  Block8 out{};
  for (int k = 0; k < kBlock; ++k) {
    for (int l = 0; l < kBlock; ++l) {
      double s = 0.0;
      for (int i = 0; i < kBlock; ++i) s += rows[i * kBlock + l] * t[k][i];
      out[k * kBlock + l] = s;
    }
  }
  return out;
}

// Exact inverse of block_dct8, including the +128 level shift. No clamping.
inline Block8 block_idct8(const Block8& coeffs) {
  const auto& t = detail::cosines().v;
  Block8 cols{};
  for (int i = 0; i < kBlock; ++i) {
    for (int l = 0; l < kBlock; ++l) {
      double s = 0.0;
      for (int k = 0; k < kBlock; ++k) s += coeffs[k * kBlock + l] * t[k][i];
      cols[i * kBlock + l] = s;
    }
  }
  Block8 out{};
  for (int i = 0; i < kBlock; ++i) {
    for (int j = 0; j < kBlock; ++j) {
      double s = 0.0;
      for (int l = 0; l < kBlock; ++l) s += cols[i * kBlock + l] * t[l][j];
      out[i * kBlock + j] = s + 128.0;
    }
  }
  return out;
}

// Value of the orthonormal basis function for coefficient (k, l) at pixel (i, j).
inline double dct_basis(int k, int l, int i, int j) {
  const auto& t = detail::cosines().v;
  return t[k][i] * t[l][j];
}

struct GridPos {
  int row;
  int col;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// Standard JPEG zigzag scan; entry 0 is DC, entry 63 is (7,7).
inline const std::array<GridPos, kBlockArea>& zigzag_order() {
  static const std::array<GridPos, kBlockArea> order = [] {
    std::array<GridPos, kBlockArea> o{};
    int idx = 0;
    for (int d = 0; d < 2 * kBlock - 1; ++d) {
      int lo = std::max(0, d - (kBlock - 1));
      int hi = std::min(d, kBlock - 1);
      if (d % 2 == 0) {  // travel up-right: row decreasing
        for (int r = hi; r >= lo; --r) o[idx++] = {r, d - r};
      } else {
        for (int r = lo; r <= hi; ++r) o[idx++] = {r, d - r};
      }
    }
    return o;
  }();
  return order;
}

// Inverse permutation: grid position (row*8+col) -> zigzag index.
inline const std::array<int, kBlockArea>& zigzag_index() {
  static const std::array<int, kBlockArea> inv = [] {
    std::array<int, kBlockArea> v{};
    const auto& zz = zigzag_order();
    for (int k = 0; k < kBlockArea; ++k) v[zz[k].row * kBlock + zz[k].col] = k;
    return v;
  }();
  return inv;
}

inline PlaneSet rgb_to_ycbcr(const RgbImage& img) {
  img.validate();
  const int h = img.height, w = img.width;
  PlaneSet ps;
  ps.y = Plane(h, w);
  Plane cb_full(h, w), cr_full(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::uint8_t* p = img.pixel(r, c);
      double R = p[0], G = p[1], B = p[2];
      ps.y.at(r, c) = detail::clamp255(0.299 * R + 0.587 * G + 0.114 * B);
      cb_full.at(r, c) = detail::clamp255(128.0 - 0.168736 * R - 0.331264 * G + 0.5 * B);
      cr_full.at(r, c) = detail::clamp255(128.0 + 0.5 * R - 0.418688 * G - 0.081312 * B);
    }
  }
  ps.cb = Plane(h / 2, w / 2);
  ps.cr = Plane(h / 2, w / 2);
  for (int r = 0; r < h / 2; ++r) {
    for (int c = 0; c < w / 2; ++c) {
      auto box = [&](const Plane& f) {
        return (f.at(2 * r, 2 * c) + f.at(2 * r, 2 * c + 1) + f.at(2 * r + 1, 2 * c) +
                f.at(2 * r + 1, 2 * c + 1)) *
               0.25;
      };
      ps.cb.at(r, c) = box(cb_full);
      ps.cr.at(r, c) = box(cr_full);
    }
  }
  return ps;
}

inline Block8 extract_block(const Plane& p, int block_row, int block_col) {
  Block8 b{};
  for (int i = 0; i < kBlock; ++i)
    for (int j = 0; j < kBlock; ++j) b[i * kBlock + j] = p.at(block_row * kBlock + i, block_col * kBlock + j);
  return b;
}

// DCT of a full plane: [zigzag channel][block row][block col], all 64 channels.
inline std::vector<double> plane_coefficients(const Plane& p) {
  require(p.height % kBlock == 0 && p.width % kBlock == 0, ErrorKind::dimension,
          "plane dimensions must be multiples of 8");
  const int gh = p.height / kBlock, gw = p.width / kBlock;
  const auto& zz = zigzag_order();
  std::vector<double> out(std::size_t(kBlockArea) * gh * gw);
  for (int br = 0; br < gh; ++br) {
    for (int bc = 0; bc < gw; ++bc) {
      Block8 coeffs = block_dct8(extract_block(p, br, bc));
      for (int k = 0; k < kBlockArea; ++k) {
        out[(std::size_t(k) * gh + br) * gw + bc] = coeffs[zz[k].row * kBlock + zz[k].col];
      }
    }
  }
  return out;
}

inline DctTensor planes_to_dct(const PlaneSet& ps, const CompressionSpec& spec) {
  spec.validate();
  require(ps.cb.height * 2 == ps.y.height && ps.cb.width * 2 == ps.y.width &&
              ps.cr.height == ps.cb.height && ps.cr.width == ps.cb.width,
          ErrorKind::dimension, "chroma planes must be half the luma size");
  require(ps.y.height % 16 == 0 && ps.y.width % 16 == 0, ErrorKind::dimension,
          "luma plane dimensions must be multiples of 16");
  const int gh = ps.y.height / kBlock, gw = ps.y.width / kBlock;
  DctTensor t(gh, gw, spec);
  int ch = 0;
  for (int p = 0; p < kPlanes; ++p) {
    const Plane& plane = ps.plane(p);
    std::vector<double> coeffs = plane_coefficients(plane);
    const int pgh = plane.height / kBlock, pgw = plane.width / kBlock;
    const int up = p == 0 ? 1 : 2;  // chroma grids are duplicated 2x2
    for (int k = 0; k < spec.keep(p); ++k, ++ch) {
      for (int r = 0; r < gh; ++r) {
        for (int c = 0; c < gw; ++c) {
          t.at(ch, r, c) =
              static_cast<float>(coeffs[(std::size_t(k) * pgh + r / up) * pgw + c / up]);
        }
      }
    }
  }
  return t;
}

inline DctTensor preprocess(const RgbImage& img, const CompressionSpec& spec) {
  spec.validate();
  return planes_to_dct(rgb_to_ycbcr(img), spec);
}

// Inverse of planes_to_dct for full tensors: rebuilds Y at full resolution
// and chroma from the top-left cell of each duplicated 2x2 group.
inline PlaneSet dct_to_planes(const DctTensor& t) {
  require(t.spec.is_full(), ErrorKind::dimension, "inverse needs all 192 channels");
  const auto& zz = zigzag_order();
  PlaneSet ps;
  for (int p = 0; p < kPlanes; ++p) {
    const int up = p == 0 ? 1 : 2;
    const int pgh = t.grid_h / up, pgw = t.grid_w / up;
    Plane plane(pgh * kBlock, pgw * kBlock);
    for (int br = 0; br < pgh; ++br) {
      for (int bc = 0; bc < pgw; ++bc) {
        Block8 coeffs{};
        for (int k = 0; k < kBlockArea; ++k) {
          coeffs[zz[k].row * kBlock + zz[k].col] = t.at(p * kBlockArea + k, br * up, bc * up);
        }
        Block8 px = block_idct8(coeffs);
        for (int i = 0; i < kBlock; ++i)
          for (int j = 0; j < kBlock; ++j) plane.at(br * kBlock + i, bc * kBlock + j) = px[i * kBlock + j];
      }
    }
    ps.plane(p) = std::move(plane);
  }
  return ps;
}

// Sum of squared coefficients per plane group.
inline std::array<double, kPlanes> plane_energy(const DctTensor& t) {
  std::array<double, kPlanes> e{};
  for (int p = 0; p < kPlanes; ++p) {
    const int off = t.group_offset(p);
    for (int k = 0; k < t.spec.keep(p); ++k) {
      for (std::size_t i = 0; i < t.plane_size(); ++i) {
        double v = t.data[std::size_t(off + k) * t.plane_size() + i];
        e[p] += v * v;
      }
    }
  }
  return e;
}

}  // namespace fun
