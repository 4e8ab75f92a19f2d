#pragma once

// Declarative architecture tables for the FUN family and compound scaling.

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fun/dct_codec.hpp"
#include "fun/errors.hpp"
#include "fun/nn/ops.hpp"

namespace fun::arch {

using nn::Activation;

enum class BlockOp { mbconv, bottleneck, conv_bn_act };

struct BlockSpec {
  BlockOp op = BlockOp::mbconv;
  int expansion = 6;  // MBConv expand ratio; bottleneck out/inner ratio
  int kernel = 3;
  int stride = 1;
  int out_channels = 0;
  double se_ratio = 0.25;  // fraction of block input channels; 0 disables SE

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct StageSpec {
  BlockSpec block;
  int repeats = 1;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct ArchSpec {
  std::string name;
  int grid_h = 28;
  int grid_w = 28;
  CompressionSpec input;  // which DCT channels the network consumes
  Activation act = Activation::swish;
  std::vector<StageSpec> stages;
  int head_width = 1280;  // 0: no head conv (pool + FC only)
  int num_classes = 1000;

  int in_channels() const { return input.channels(); }
  int total_blocks() const {
    int n = 0;
    for (const auto& s : stages) n += s.repeats;
    return n;
  }

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct ScaleCoeffs {
  int phi = 0;
  double alpha = 1.2;   // depth
  double beta = 1.1;    // width
  double gamma = 1.15;  // resolution
};

inline StageSpec mbconv(int expansion, int kernel, int stride, int width, int repeats) {
  return {{BlockOp::mbconv, expansion, kernel, stride, width, 0.25}, repeats};
}

inline StageSpec bottleneck(int stride, int width, int repeats) {
  return {{BlockOp::bottleneck, 4, 3, stride, width, 0.0}, repeats};
}

inline StageSpec conv_bn_act(int kernel, int stride, int width) {
  return {{BlockOp::conv_bn_act, 1, kernel, stride, width, 0.0}, 1};
}

// Baseline eFUN: EfficientNet-B0's 28x28-and-deeper path widened to 128/160
// with a narrow entry stage on the 192 DCT channels.
inline ArchSpec efun_base() {
  ArchSpec s;
  s.name = "efun";
  s.stages = {
      mbconv(6, 3, 1, 32, 3),
      mbconv(6, 5, 1, 128, 3),
      mbconv(6, 5, 2, 160, 2),  // -> 14x14
      mbconv(6, 5, 2, 192, 2),  // -> 7x7
  };
  return s;
}

// EfficientNet-B0 without its stem conv, strides reduced to stay at 28x28.
inline ArchSpec efun_variant_a() {
  ArchSpec s;
  s.name = "efun-variant-a";
  s.stages = {
      mbconv(1, 3, 1, 16, 1), mbconv(6, 3, 1, 24, 2), mbconv(6, 5, 1, 40, 2),  mbconv(6, 3, 1, 80, 3),
      mbconv(6, 5, 2, 112, 3), mbconv(6, 5, 1, 192, 4), mbconv(6, 3, 2, 320, 1),
  };
  return s;
}

// The final EfficientNet-B0 stages fed directly with the 28x28 DCT input.
inline ArchSpec efun_variant_b() {
  ArchSpec s;
  s.name = "efun-variant-b";
  s.stages = {
      mbconv(6, 3, 1, 80, 3),
      mbconv(6, 5, 2, 112, 3),
      mbconv(6, 5, 1, 192, 4),
      mbconv(6, 3, 2, 320, 1),
  };
  return s;
}

// ResNet-50 minus its stem and conv2_x, widths 512/768/1024.
inline ArchSpec resfun() {
  ArchSpec s;
  s.name = "resfun";
  s.act = Activation::relu;
  s.stages = {
      conv_bn_act(1, 1, 256),
      bottleneck(1, 512, 4),
      bottleneck(2, 768, 6),
      bottleneck(2, 1024, 3),
  };
  s.head_width = 0;
  return s;
}

// Nearest multiple of 8, at least 8, never more than 10% below the target.
inline int round_width(double width) {
  int v = std::max(8, int(width + 4.0) / 8 * 8);
  if (v < 0.9 * width) v += 8;
  return v;
}

inline ArchSpec compound_scale(const ArchSpec& base, const ScaleCoeffs& c) {
  if (c.phi == 0) return base;
  const double depth = std::pow(c.alpha, c.phi);
  const double width = std::pow(c.beta, c.phi);
  const double res = std::pow(c.gamma, c.phi);
  ArchSpec s = base;
  auto even = [](double g) { return 2 * int(std::lround(g / 2.0)); };
  s.grid_h = even(base.grid_h * res);
  s.grid_w = even(base.grid_w * res);
  require(s.grid_h > 0 && s.grid_w > 0, ErrorKind::degenerate_scale,
          "compound scaling shrinks the input grid to zero (phi=" + std::to_string(c.phi) + ")");
  for (auto& st : s.stages) {
    st.repeats = int(std::ceil(st.repeats * depth - 1e-9));
    st.block.out_channels = round_width(st.block.out_channels * width);
    require(st.repeats > 0 && st.block.out_channels > 0, ErrorKind::degenerate_scale,
            "compound scaling produced an empty stage");
  }
  if (s.head_width > 0) s.head_width = round_width(s.head_width * width);
  return s;
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"efun-s+",        "efun-s",         "efun",   "efun-l",
                                                 "efun-variant-a", "efun-variant-b", "resfun", "micro"};
  return names;
}

// Toy-scale member of the family: 4x4 grid (32x32 RGB), one block per stage.
inline constexpr int kMicroPhi = -14;

inline ArchSpec builtin(const std::string& name) {
  auto scaled = [](int phi, const char* n) {
    ArchSpec s = compound_scale(efun_base(), {phi});
    s.name = n;
    return s;
  };
  if (name == "efun") return efun_base();
  if (name == "efun-l") return scaled(1, "efun-l");
  if (name == "efun-s") return scaled(-1, "efun-s");
  if (name == "efun-s+") return scaled(-2, "efun-s+");
  if (name == "micro") return scaled(kMicroPhi, "micro");
  if (name == "efun-variant-a") return efun_variant_a();
  if (name == "efun-variant-b") return efun_variant_b();
  if (name == "resfun") return resfun();
  std::string known;
  for (const auto& n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
  fail(ErrorKind::usage, "unknown architecture '" + name + "' (known: " + known + ")");
}

// ------------------------------------------------------------ text format
//
//   name efun
//   input 28 28 64/64/64
//   activation swish
//   stage mbconv6 3 1 32 3        # operator kernel stride width repeats [se=R]
//   head 1280
//   classes 1000

inline std::string op_token(const BlockSpec& b) {
  switch (b.op) {
    case BlockOp::mbconv: return "mbconv" + std::to_string(b.expansion);
    case BlockOp::bottleneck: return "bottleneck" + std::to_string(b.expansion);
    case BlockOp::conv_bn_act: return "convbnact";
  }
  return "?";
}

inline void write_arch(std::ostream& os, const ArchSpec& s) {
  os << "name " << s.name << "\n";
  os << "input " << s.grid_h << " " << s.grid_w << " " << s.input.to_string() << "\n";
  os << "activation " << nn::to_string(s.act) << "\n";
  for (const auto& st : s.stages) {
    os << "stage " << op_token(st.block) << " " << st.block.kernel << " " << st.block.stride << " "
       << st.block.out_channels << " " << st.repeats;
    const double default_se = st.block.op == BlockOp::mbconv ? 0.25 : 0.0;
    if (st.block.se_ratio != default_se) os << " se=" << st.block.se_ratio;
    os << "\n";
  }
  os << "head " << s.head_width << "\n";
  os << "classes " << s.num_classes << "\n";
}

inline std::string arch_to_string(const ArchSpec& s) {
  std::ostringstream os;
  write_arch(os, s);
  return os.str();
}

inline BlockSpec parse_op(const std::string& tok) {
  BlockSpec b;
  auto suffix_int = [&](const std::string& prefix) {
    const std::string rest = tok.substr(prefix.size());
    require(!rest.empty() && rest.find_first_not_of("0123456789") == std::string::npos, ErrorKind::config,
            "bad operator '" + tok + "'");
    return std::stoi(rest);
  };
  if (tok.rfind("mbconv", 0) == 0) {
    b.op = BlockOp::mbconv;
    b.expansion = suffix_int("mbconv");
    b.se_ratio = 0.25;
  } else if (tok.rfind("bottleneck", 0) == 0) {
    b.op = BlockOp::bottleneck;
    b.expansion = suffix_int("bottleneck");
    b.se_ratio = 0.0;
  } else if (tok == "convbnact") {
    b.op = BlockOp::conv_bn_act;
    b.expansion = 1;
    b.se_ratio = 0.0;
  } else {
    fail(ErrorKind::config, "unknown operator '" + tok + "'");
  }
  return b;
}

inline void validate(const ArchSpec& s) {
  require(s.grid_h > 0 && s.grid_w > 0, ErrorKind::config, "input grid must be positive");
  s.input.validate();
  require(s.in_channels() > 0, ErrorKind::config, "architecture consumes no input channels");
  require(!s.stages.empty(), ErrorKind::config, "architecture has no stages");
  require(s.num_classes > 0 && s.head_width >= 0, ErrorKind::config, "bad head/classes");
  int h = s.grid_h, w = s.grid_w;
  for (const auto& st : s.stages) {
    const auto& b = st.block;
    require(b.stride == 1 || b.stride == 2, ErrorKind::config, "stride must be 1 or 2");
    require(b.kernel >= 1 && b.kernel % 2 == 1, ErrorKind::config, "kernel must be odd");
    require(b.expansion >= 1 && b.out_channels > 0 && st.repeats > 0, ErrorKind::config, "bad stage");
    require(b.op != BlockOp::bottleneck || b.out_channels % b.expansion == 0, ErrorKind::config,
            "bottleneck width must divide by its expansion");
    h = int(nn::conv_out_extent(std::size_t(h), std::size_t(b.kernel), b.stride, (b.kernel - 1) / 2));
    w = int(nn::conv_out_extent(std::size_t(w), std::size_t(b.kernel), b.stride, (b.kernel - 1) / 2));
  }
  require(h >= 1 && w >= 1, ErrorKind::config, "spatial size collapses");
}

inline ArchSpec read_arch(std::istream& is) {
  ArchSpec s;
  s.stages.clear();
  std::string line;
  int lineno = 0;
  bool seen_input = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrorKind::config, "arch line " + std::to_string(lineno) + ": " + why);
    };
    if (key == "name") {
      ls >> s.name;
    } else if (key == "input") {
      std::string keep;
      if (!(ls >> s.grid_h >> s.grid_w >> keep)) bad("expected 'input H W Y/CB/CR'");
      s.input = CompressionSpec::parse(keep);
      seen_input = true;
    } else if (key == "activation") {
      std::string a;
      ls >> a;
      if (a == "swish") s.act = Activation::swish;
      else if (a == "relu") s.act = Activation::relu;
      else bad("unknown activation '" + a + "'");
    } else if (key == "stage") {
      std::string op;
      StageSpec st;
      if (!(ls >> op >> st.block.kernel >> st.block.stride >> st.block.out_channels >> st.repeats)) {
        bad("expected 'stage OP KERNEL STRIDE WIDTH REPEATS'");
      }
      BlockSpec parsed = parse_op(op);
      st.block.op = parsed.op;
      st.block.expansion = parsed.expansion;
      st.block.se_ratio = parsed.se_ratio;
      std::string extra;
      while (ls >> extra) {
        if (extra.rfind("se=", 0) == 0) st.block.se_ratio = std::stod(extra.substr(3));
        else bad("unexpected token '" + extra + "'");
      }
      s.stages.push_back(st);
    } else if (key == "head") {
      if (!(ls >> s.head_width)) bad("expected 'head WIDTH'");
    } else if (key == "classes") {
      if (!(ls >> s.num_classes)) bad("expected 'classes N'");
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  require(seen_input, ErrorKind::config, "arch spec lacks an 'input' line");
  validate(s);
  return s;
}

inline ArchSpec arch_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_arch(is);
}

inline ArchSpec load_arch(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::io, "cannot open arch spec " + path);
  return read_arch(f);
}

// ------------------------------------------------------- block expansion

struct BlockPlan {
  BlockSpec spec;    // stride already resolved for this repeat
  int index = 0;     // position in the network
  int in_channels = 0;
  int mid_channels = 0;  // MBConv expanded width / bottleneck inner width
  int se_channels = 0;
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  bool skip = false;  // residual add
};

inline int se_width(int in_channels, double ratio) {
  return ratio > 0.0 ? std::max(1, int(std::lround(in_channels * ratio))) : 0;
}

inline std::vector<BlockPlan> plan_blocks(const ArchSpec& s) {
  std::vector<BlockPlan> out;
  int c = s.in_channels(), h = s.grid_h, w = s.grid_w, idx = 0;
  for (const auto& st : s.stages) {
    for (int r = 0; r < st.repeats; ++r) {
      BlockPlan p;
      p.spec = st.block;
      p.spec.stride = r == 0 ? st.block.stride : 1;
      p.index = idx++;
      p.in_channels = c;
      p.in_h = h;
      p.in_w = w;
      const int pad = (p.spec.kernel - 1) / 2;
      p.out_h = int(nn::conv_out_extent(std::size_t(h), std::size_t(p.spec.kernel), p.spec.stride, pad));
      p.out_w = int(nn::conv_out_extent(std::size_t(w), std::size_t(p.spec.kernel), p.spec.stride, pad));
      switch (p.spec.op) {
        case BlockOp::mbconv:
          p.mid_channels = c * p.spec.expansion;
          p.se_channels = se_width(c, p.spec.se_ratio);
          p.skip = p.spec.stride == 1 && c == p.spec.out_channels;
          break;
        case BlockOp::bottleneck:
          p.mid_channels = p.spec.out_channels / p.spec.expansion;
          p.skip = p.spec.stride == 1 && c == p.spec.out_channels;
          break;
        case BlockOp::conv_bn_act:
          p.mid_channels = p.spec.out_channels;
          p.skip = false;
          break;
      }
      out.push_back(p);
      c = p.spec.out_channels;
      h = p.out_h;
      w = p.out_w;
    }
  }
  return out;
}

inline int final_channels(const ArchSpec& s) {
  return s.stages.empty() ? s.in_channels() : s.stages.back().block.out_channels;
}

}  // namespace fun::arch
