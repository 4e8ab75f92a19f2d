#pragma once

// Closed-form parameter and multiply-accumulate counts for an ArchSpec.
//
// Parameters: conv k*k*Cin/groups*Cout (no bias inside blocks), BN 2*C,
// SE convs with bias, FC in*out + out. Running statistics are excluded.
// MACs: conv Hout*Wout*Cout*k*k*Cin/groups, FC in*out, plus one MAC per
// pooled element (SE squeeze and the head pool). BN and activations are free.

#include <cstdint>
#include <vector>

#include "fun/arch/spec.hpp"

namespace fun::arch {

using Count = std::int64_t;

struct Cost {
  Count params = 0;
  Count macs = 0;

  Cost& operator+=(const Cost& o) {
    params += o.params;
    macs += o.macs;
    return *this;
  }
};

inline Cost conv_cost(Count in, Count out, Count k, Count groups, Count out_h, Count out_w, bool bias = false) {
  return {k * k * (in / groups) * out + (bias ? out : 0), out_h * out_w * out * k * k * (in / groups)};
}

inline Cost bn_cost(Count channels) { return {2 * channels, 0}; }

inline Cost fc_cost(Count in, Count out) { return {in * out + out, in * out}; }

inline Cost block_cost(const BlockPlan& p) {
  Cost c;
  const Count hi = p.in_h, wi = p.in_w, ho = p.out_h, wo = p.out_w;
  const Count k = p.spec.kernel, cin = p.in_channels, cout = p.spec.out_channels, mid = p.mid_channels;
  switch (p.spec.op) {
    case BlockOp::mbconv:
      if (p.spec.expansion != 1) {
        c += conv_cost(cin, mid, 1, 1, hi, wi);
        c += bn_cost(mid);
      }
      c += conv_cost(mid, mid, k, mid, ho, wo);
      c += bn_cost(mid);
      if (p.se_channels > 0) {
        c += conv_cost(mid, p.se_channels, 1, 1, 1, 1, true);
        c += conv_cost(p.se_channels, mid, 1, 1, 1, 1, true);
        c.macs += ho * wo * mid;
      }
      c += conv_cost(mid, cout, 1, 1, ho, wo);
      c += bn_cost(cout);
      break;
    case BlockOp::bottleneck:
      c += conv_cost(cin, mid, 1, 1, hi, wi);
      c += bn_cost(mid);
      c += conv_cost(mid, mid, k, 1, ho, wo);
      c += bn_cost(mid);
      c += conv_cost(mid, cout, 1, 1, ho, wo);
      c += bn_cost(cout);
      if (!p.skip) {
        c += conv_cost(cin, cout, 1, 1, ho, wo);
        c += bn_cost(cout);
      }
      break;
    case BlockOp::conv_bn_act:
      c += conv_cost(cin, cout, k, 1, ho, wo);
      c += bn_cost(cout);
      break;
  }
  return c;
}

inline Cost head_cost(const ArchSpec& s, Count channels, Count h, Count w) {
  Cost c;
  if (s.head_width > 0) {
    c += conv_cost(channels, s.head_width, 1, 1, h, w);
    c += bn_cost(s.head_width);
    channels = s.head_width;
  }
  c.macs += h * w * channels;
  c += fc_cost(channels, s.num_classes);
  return c;
}

inline Cost total_cost(const ArchSpec& s) {
  Cost c;
  const auto plan = plan_blocks(s);
  for (const auto& p : plan) c += block_cost(p);
  const Count h = plan.empty() ? s.grid_h : plan.back().out_h;
  const Count w = plan.empty() ? s.grid_w : plan.back().out_w;
  c += head_cost(s, final_channels(s), h, w);
  return c;
}

inline Count count_params(const ArchSpec& s) { return total_cost(s).params; }

// MAC count at the spec's own input grid.
inline Count count_flops(const ArchSpec& s) { return total_cost(s).macs; }

// MAC count at a different input grid (same channel layout).
inline Count count_flops(const ArchSpec& s, int grid_h, int grid_w) {
  ArchSpec t = s;
  t.grid_h = grid_h;
  t.grid_w = grid_w;
  return count_flops(t);
}

struct LayerSummary {
  int index = 0;
  std::string op;
  int in_channels = 0, out_channels = 0;
  int kernel = 0, stride = 0;
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  bool skip = false;
  Cost cost;
};

inline std::vector<LayerSummary> summarize(const ArchSpec& s) {
  std::vector<LayerSummary> out;
  for (const auto& p : plan_blocks(s)) {
    out.push_back({p.index, op_token(p.spec), p.in_channels, p.spec.out_channels, p.spec.kernel, p.spec.stride,
                   p.in_h, p.in_w, p.out_h, p.out_w, p.skip, block_cost(p)});
  }
  return out;
}

}  // namespace fun::arch
