#pragma once

// Inference-time frequency-channel reduction: zero-masking keeps the
// network intact, pruning rebuilds the first block for fewer inputs.

#include <cstdint>
#include <memory>
#include <vector>

#include "fun/arch/accounting.hpp"
#include "fun/arch/model.hpp"
#include "fun/dct_codec.hpp"

namespace fun {

// Full-tensor channel indices that survive a spec (zigzag prefix per plane).
inline std::vector<int> kept_channels(const CompressionSpec& spec) {
  spec.validate();
  std::vector<int> idx;
  for (int p = 0; p < kPlanes; ++p)
    for (int k = 0; k < spec.keep(p); ++k) idx.push_back(p * kBlockArea + k);
  return idx;
}

inline DctTensor mask_channels(const DctTensor& x, const CompressionSpec& spec) {
  spec.validate();
  require(x.spec.is_full(), ErrorKind::dimension, "masking needs a full 192-channel tensor");
  DctTensor y = x;
  const std::size_t plane = x.plane_size();
  for (int p = 0; p < kPlanes; ++p)
    for (int k = spec.keep(p); k < kBlockArea; ++k)
      std::fill_n(y.data.begin() + std::ptrdiff_t(std::size_t(p * kBlockArea + k) * plane), plane, 0.0f);
  return y;
}

// Same operation on an N x 192 x H x W batch.
template <class T>
void mask_channels_inplace(nn::Tensor<T>& x, const CompressionSpec& spec) {
  spec.validate();
  require(x.rank() == 4 && x.c() == std::size_t(kFullChannels), ErrorKind::dimension,
          "masking needs a full 192-channel batch");
  const std::size_t plane = x.h() * x.w();
  for (std::size_t n = 0; n < x.n(); ++n)
    for (int p = 0; p < kPlanes; ++p)
      for (int k = spec.keep(p); k < kBlockArea; ++k) {
        T* d = &x.at(n, std::size_t(p * kBlockArea + k), 0, 0);
        std::fill_n(d, plane, T(0));
      }
}

// Places a truncated tensor back into the 192-channel layout, zeros elsewhere.
inline DctTensor zero_pad(const DctTensor& t) {
  DctTensor full(t.grid_h, t.grid_w, CompressionSpec::full());
  const std::size_t plane = t.plane_size();
  const auto idx = kept_channels(t.spec);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(t.data.begin() + std::ptrdiff_t(i * plane), plane,
                full.data.begin() + std::ptrdiff_t(std::size_t(idx[i]) * plane));
  return full;
}

template <class T>
struct PruneResult {
  std::unique_ptr<arch::Model<T>> model;
  std::int64_t params_before = 0;
  std::int64_t params_after = 0;
  std::int64_t delta() const { return params_before - params_after; }
};

namespace detail {

// Copies src into dst; along each axis either keep a prefix, or pick the
// given input-channel indices when the axis is the network input width.
template <class T>
void slice_into(const nn::Tensor<T>& src, nn::Tensor<T>& dst, std::size_t old_in, const std::vector<int>& kept) {
  const std::size_t R = src.rank();
  std::vector<std::vector<std::size_t>> maps(R);
  for (std::size_t a = 0; a < R; ++a) {
    const std::size_t o = src.dim(a), n = dst.dim(a);
    if (o == old_in && n == kept.size() && n != o) {
      for (int k : kept) maps[a].push_back(std::size_t(k));
    } else {
      require(n <= o, ErrorKind::dimension, "pruned tensor grows along an axis");
      for (std::size_t i = 0; i < n; ++i) maps[a].push_back(i);
    }
  }
  std::vector<std::size_t> sstride(R, 1);
  for (std::size_t a = R - 1; a-- > 0;) sstride[a] = sstride[a + 1] * src.dim(a + 1);
  std::vector<std::size_t> pos(R, 0);
  for (std::size_t flat = 0; flat < dst.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t a = 0; a < R; ++a) off += maps[a][pos[a]] * sstride[a];
    dst[flat] = src[off];
    for (std::size_t a = R; a-- > 0;) {
      if (++pos[a] < dst.dim(a)) break;
      pos[a] = 0;
    }
  }
}

}  // namespace detail

// Rebuilds the first block for Cin = spec.channels() (expanded width and SE
// width recomputed from the new Cin), copying the surviving input columns
// and leading output slices. All later layers are copied unchanged.
template <class T>
PruneResult<T> prune_first_block(arch::Model<T>& model, const CompressionSpec& spec, std::uint64_t seed = 0) {
  spec.validate();
  require(model.spec().input.is_full(), ErrorKind::config, "pruning needs a model with 192 input channels");
  require(spec.channels() > 0, ErrorKind::spec, "pruning to zero input channels");
  arch::ArchSpec s = model.spec();
  s.input = spec;
  PruneResult<T> r;
  r.model = std::make_unique<arch::Model<T>>(s, seed);
  r.params_before = model.parameter_count();
  const auto kept = kept_channels(spec);
  auto src = model.state();
  auto dst = r.model->state();
  require(src.size() == dst.size(), ErrorKind::dimension, "pruned layout differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!(src[i].name == dst[i].name)) fail(ErrorKind::dimension, "pruned layout differs at " + src[i].name);
    if (src[i].tensor->dims() == dst[i].tensor->dims()) {
      *dst[i].tensor = *src[i].tensor;
    } else {
      detail::slice_into(*src[i].tensor, *dst[i].tensor, std::size_t(kFullChannels), kept);
    }
  }
  arch::InputNorm n;
  for (int k : kept) {
    n.mean.push_back(model.norm().mean[std::size_t(k)]);
    n.stddev.push_back(model.norm().stddev[std::size_t(k)]);
  }
  r.model->set_norm(std::move(n));
  r.params_after = r.model->parameter_count();
  return r;
}

// Structural size without instantiating anything.
inline std::int64_t pruned_param_count(const arch::ArchSpec& full, const CompressionSpec& spec) {
  spec.validate();
  arch::ArchSpec s = full;
  s.input = spec;
  return arch::count_params(s);
}

}  // namespace fun
