#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fun/compression.hpp"
#include "fun/fdt_format.hpp"

using namespace fun;

namespace {

// Direct double-sum orthonormal DCT-II of (x - 128), written out independently.
Block8 oracle_dct(const Block8& b) {
  Block8 out{};
  const double pi = std::numbers::pi;
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
          s += (b[x * 8 + y] - 128.0) * std::cos((2 * x + 1) * u * pi / 16) * std::cos((2 * y + 1) * v * pi / 16);
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5, cv = v == 0 ? std::sqrt(0.125) : 0.5;
      out[u * 8 + v] = cu * cv * s;
    }
  return out;
}

Block8 random_block(std::mt19937_64& g) {
  std::uniform_real_distribution<double> d(0.0, 255.0);
  Block8 b;
  for (auto& v : b) v = d(g);
  return b;
}

RgbImage uniform_image(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      auto* p = img.pixel(i, j);
      p[0] = r, p[1] = g, p[2] = b;
    }
  return img;
}

RgbImage random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  RgbImage img(h, w);
  for (auto& v : img.data) v = std::uint8_t(g() & 0xff);
  return img;
}

}  // namespace

TEST(ColorConversion, AchromaticImages) {
  for (std::uint8_t level : {std::uint8_t(0), std::uint8_t(255)}) {
    const PlaneSet ps = rgb_to_ycbcr(uniform_image(16, 16, level, level, level));
    for (double v : ps.y.data) EXPECT_NEAR(v, level, 1e-9);
    for (double v : ps.cb.data) EXPECT_NEAR(v, 128.0, 1e-9);
    for (double v : ps.cr.data) EXPECT_NEAR(v, 128.0, 1e-9);
    EXPECT_EQ(ps.cb.height, 8);
    EXPECT_EQ(ps.cb.width, 8);
  }
}

TEST(ColorConversion, PureRed) {
  const PlaneSet ps = rgb_to_ycbcr(uniform_image(16, 32, 255, 0, 0));
  EXPECT_NEAR(ps.y.at(3, 5), 0.299 * 255, 1e-9);
  EXPECT_NEAR(ps.y.at(3, 5), 76.245, 1e-9);
  EXPECT_NEAR(ps.cb.at(2, 2), 128.0 - 0.168736 * 255, 1e-9);
  EXPECT_NEAR(ps.cb.at(2, 2), 84.97232, 1e-9);
  EXPECT_DOUBLE_EQ(ps.cr.at(1, 7), 255.0);
}

TEST(ColorConversion, ChromaIsBoxAverage) {
  RgbImage img = uniform_image(16, 16, 0, 0, 0);
  // One blue pixel in the top-left 2x2 cell.
  img.pixel(1, 0)[2] = 200;
  const PlaneSet ps = rgb_to_ycbcr(img);
  const double cb_pixel = 128.0 + 0.5 * 200;
  EXPECT_NEAR(ps.cb.at(0, 0), (3 * 128.0 + cb_pixel) / 4, 1e-9);
  EXPECT_NEAR(ps.cb.at(0, 1), 128.0, 1e-9);
}

TEST(ColorConversion, RejectsBadDimensions) {
  try {
    rgb_to_ycbcr(RgbImage(16, 24));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(BlockDct, ConstantBlocks) {
  Block8 mid;
  mid.fill(128.0);
  for (double c : block_dct8(mid)) EXPECT_EQ(c, 0.0);
  Block8 white;
  white.fill(255.0);
  const Block8 c = block_dct8(white);
  EXPECT_NEAR(c[0], 1016.0, 1e-9);
  for (int i = 1; i < 64; ++i) EXPECT_NEAR(c[i], 0.0, 1e-9);
}

TEST(BlockDct, MatchesDirectSum) {
  std::mt19937_64 g(11);
  for (int t = 0; t < 50; ++t) {
    const Block8 b = random_block(g);
    const Block8 got = block_dct8(b), want = oracle_dct(b);
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(BlockDct, InverseExamples) {
  Block8 z{};
  for (double v : block_idct8(z)) EXPECT_NEAR(v, 128.0, 1e-12);
  Block8 dc{};
  dc[0] = 1016.0;
  for (double v : block_idct8(dc)) EXPECT_NEAR(v, 255.0, 1e-9);
}

TEST(BlockDct, RoundTripAndParseval) {
  std::mt19937_64 g(5);
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Block8 b = random_block(g);
    const Block8 c = block_dct8(b);
    const Block8 r = block_idct8(c);
    double e_pix = 0.0, e_coef = 0.0;
    for (int i = 0; i < 64; ++i) {
      worst_rt = std::max(worst_rt, std::abs(r[i] - b[i]));
      e_pix += (b[i] - 128.0) * (b[i] - 128.0);
      e_coef += c[i] * c[i];
    }
    worst_parseval = std::max(worst_parseval, std::abs(e_coef - e_pix) / e_pix);
  }
  EXPECT_LT(worst_rt, 1e-4);
  EXPECT_LT(worst_parseval, 1e-4);
}

TEST(Zigzag, StandardOrder) {
  const auto& zz = zigzag_order();
  const int expect[6][2] = {{0, 0}, {0, 1}, {1, 0}, {2, 0}, {1, 1}, {0, 2}};
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(zz[i].row, expect[i][0]) << i;
    EXPECT_EQ(zz[i].col, expect[i][1]) << i;
  }
  EXPECT_EQ(zz[63].row, 7);
  EXPECT_EQ(zz[63].col, 7);
  // Permutation with nondecreasing anti-diagonal.
  std::array<bool, 64> seen{};
  for (int i = 0; i < 64; ++i) {
    seen[zz[i].row * 8 + zz[i].col] = true;
    if (i) {
      EXPECT_GE(zz[i].row + zz[i].col, zz[i - 1].row + zz[i - 1].col);
    }
    EXPECT_EQ(zigzag_index()[zz[i].row * 8 + zz[i].col], i);
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(Preprocess, GrayImageShape) {
  const DctTensor t = preprocess(uniform_image(224, 224, 128, 128, 128), CompressionSpec::full());
  EXPECT_EQ(t.grid_h, 28);
  EXPECT_EQ(t.grid_w, 28);
  EXPECT_EQ(t.channels, 192);
  for (float v : t.data) EXPECT_NEAR(v, 0.0f, 1e-9);
}

TEST(Preprocess, ChannelCountsFollowSpec) {
  const RgbImage img = random_image(32, 48, 3);
  const DctTensor t = preprocess(img, CompressionSpec::parse("64,12,12"));
  EXPECT_EQ(t.channels, 88);
  EXPECT_EQ(t.data.size(), std::size_t(88 * 4 * 6));
}

TEST(Preprocess, LayoutMatchesBlockTransform) {
  const RgbImage img = random_image(32, 32, 9);
  const DctTensor t = preprocess(img, CompressionSpec::full());
  const PlaneSet ps = rgb_to_ycbcr(img);
  const auto& zz = zigzag_order();
  // Luma block (1, 2).
  const Block8 y = oracle_dct(extract_block(ps.y, 1, 2));
  for (int k = 0; k < 64; ++k) EXPECT_NEAR(t.at(k, 1, 2), y[zz[k].row * 8 + zz[k].col], 1e-3);
  // Chroma block (0, 1) is duplicated over grid cells (0..1, 2..3).
  const Block8 cr = oracle_dct(extract_block(ps.cr, 0, 1));
  for (int k = 0; k < 64; ++k)
    for (int r = 0; r < 2; ++r)
      for (int c = 2; c < 4; ++c) EXPECT_NEAR(t.at(128 + k, r, c), cr[zz[k].row * 8 + zz[k].col], 1e-3);
}

TEST(Preprocess, TruncationEqualsZeroingFullTensor) {
  const RgbImage img = random_image(48, 32, 21);
  const CompressionSpec s{44, 10, 10};
  const DctTensor full = preprocess(img, CompressionSpec::full());
  const DctTensor padded = zero_pad(preprocess(img, s));
  DctTensor zeroed = full;
  for (int c = 0; c < 192; ++c) {
    const int p = c / 64, k = c % 64;
    if (k >= s.keep(p))
      for (int r = 0; r < full.grid_h; ++r)
        for (int col = 0; col < full.grid_w; ++col) zeroed.at(c, r, col) = 0.0f;
  }
  EXPECT_EQ(padded.data, zeroed.data);
}

TEST(Preprocess, InverseRecoversPlanes) {
  const RgbImage img = random_image(32, 32, 4);
  const PlaneSet ps = rgb_to_ycbcr(img);
  const PlaneSet back = dct_to_planes(preprocess(img, CompressionSpec::full()));
  for (int p = 0; p < 3; ++p) {
    ASSERT_EQ(back.plane(p).data.size(), ps.plane(p).data.size());
    for (std::size_t i = 0; i < ps.plane(p).data.size(); ++i)
      EXPECT_NEAR(back.plane(p).data[i], ps.plane(p).data[i], 1e-3);
  }
}

TEST(CompressionSpecText, ParseAndBounds) {
  EXPECT_EQ(CompressionSpec::parse("64/12/12"), (CompressionSpec{64, 12, 12}));
  EXPECT_EQ(CompressionSpec::parse("14,5,5").channels(), 24);
  for (const char* bad : {"65,0,0", "1,2", "a,b,c", "1,2,3,4", "-1,0,0"}) {
    try {
      CompressionSpec::parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::spec) << bad;
    }
  }
}

TEST(Fdt1, RoundTripIsExact) {
  const DctTensor t = preprocess(random_image(32, 16, 8), CompressionSpec{32, 8, 8});
  std::stringstream ss;
  write_fdt1(ss, t);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4 + 6 * 4 + t.data.size() * 4);
  EXPECT_EQ(bytes.substr(0, 4), "FDT1");
  // gh = 4 little-endian.
  EXPECT_EQ(bytes[4], 4);
  EXPECT_EQ(bytes[5], 0);
  std::stringstream in(bytes);
  EXPECT_EQ(read_fdt1(in), t);
}

TEST(Fdt1, RejectsCorruptInput) {
  const DctTensor t = preprocess(random_image(16, 16, 8), CompressionSpec::full());
  std::stringstream ss;
  write_fdt1(ss, t);
  std::string bytes = ss.str();
  std::stringstream bad_magic("FDT2" + bytes.substr(4));
  EXPECT_THROW(read_fdt1(bad_magic), Error);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_fdt1(truncated), Error);
}
