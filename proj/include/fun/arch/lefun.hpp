#pragma once

// Learnable replacement for the fixed block DCT: an 8x8 stride-8 conv with
// 64 outputs applied to each of Y, Cb, Cr, followed by the same chroma
// duplication and stacking as the static pipeline.

#include <memory>
#include <string>
#include <vector>

#include "fun/arch/model.hpp"
#include "fun/dct_codec.hpp"

namespace fun::arch {

enum class FrontKind { none, shared, per_plane };

inline const char* to_string(FrontKind k) {
  switch (k) {
    case FrontKind::none: return "none";
    case FrontKind::shared: return "shared";
    case FrontKind::per_plane: return "per-plane";
  }
  return "?";
}

inline FrontKind parse_front_kind(const std::string& s) {
  if (s == "none") return FrontKind::none;
  if (s == "shared") return FrontKind::shared;
  if (s == "per-plane") return FrontKind::per_plane;
  fail(ErrorKind::config, "unknown front kind '" + s + "'");
}

// Batched YCbCr planes in pixel units: y is N x 1 x H x W, chroma N x 1 x H/2 x W/2.
template <class T>
struct PlaneBatch {
  Tensor<T> y, cb, cr;

  const Tensor<T>& plane(int i) const { return i == 0 ? y : (i == 1 ? cb : cr); }
};

template <class T>
PlaneBatch<T> make_plane_batch(const std::vector<const PlaneSet*>& items) {
  require(!items.empty(), ErrorKind::dimension, "empty plane batch");
  const std::size_t N = items.size();
  PlaneBatch<T> b;
  Tensor<T>* dst[3] = {&b.y, &b.cb, &b.cr};
  for (int p = 0; p < kPlanes; ++p) {
    const Plane& first = items[0]->plane(p);
    *dst[p] = Tensor<T>({N, 1, std::size_t(first.height), std::size_t(first.width)});
    for (std::size_t n = 0; n < N; ++n) {
      const Plane& pl = items[n]->plane(p);
      require(pl.height == first.height && pl.width == first.width, ErrorKind::dimension,
              "plane batch mixes image sizes");
      for (std::size_t i = 0; i < pl.data.size(); ++i) (*dst[p])[n * pl.data.size() + i] = T(pl.data[i]);
    }
  }
  return b;
}

template <class T>
class LearnableFront {
 public:
  LearnableFront(FrontKind kind, Rng& rng) : kind_(kind) {
    require(kind != FrontKind::none, ErrorKind::config, "front kind 'none' has no layer");
    const int banks = kind == FrontKind::shared ? 1 : kPlanes;
    for (int b = 0; b < banks; ++b) {
      const std::string suffix = banks == 1 ? "" : "." + std::to_string(b);
      weights_.emplace_back("weight" + suffix, Tensor<T>({std::size_t(kBlockArea), 1, kBlock, kBlock}));
      biases_.emplace_back("bias" + suffix, Tensor<T>({std::size_t(kBlockArea)}));
      // Unit expected filter norm like the DCT basis, level shift folded into the bias.
      auto& w = weights_.back().value;
      for (auto& v : w.data()) v = T(rng.normal(0.0, 1.0 / kBlock));
      for (int k = 0; k < kBlockArea; ++k) {
        double sum = 0.0;
        for (int i = 0; i < kBlock * kBlock; ++i) sum += double(w[std::size_t(k * kBlockArea + i)]);
        biases_.back().value[std::size_t(k)] = T(-128.0 * sum);
      }
    }
  }

  FrontKind kind() const { return kind_; }
  std::size_t banks() const { return weights_.size(); }
  nn::Parameter<T>& weight(std::size_t bank) { return weights_.at(bank); }
  nn::Parameter<T>& bias(std::size_t bank) { return biases_.at(bank); }

  // Orthonormal DCT basis in zigzag order with the -128 level shift folded
  // into the bias; reproduces the static pipeline.
  void init_dct_basis() {
    const auto& zz = zigzag_order();
    for (std::size_t b = 0; b < banks(); ++b) {
      for (int k = 0; k < kBlockArea; ++k) {
        double sum = 0.0;
        for (int i = 0; i < kBlock; ++i)
          for (int j = 0; j < kBlock; ++j) {
            const double v = dct_basis(zz[k].row, zz[k].col, i, j);
            weights_[b].value.at(std::size_t(k), 0, std::size_t(i), std::size_t(j)) = T(v);
            sum += v;
          }
        biases_[b].value[std::size_t(k)] = T(-128.0 * sum);
      }
    }
  }

  // Returns N x 192 x H/8 x W/8.
  Tensor<T> forward(const PlaneBatch<T>& x) {
    x_ = x;
    const std::size_t N = x.y.n(), gh = x.y.h() / kBlock, gw = x.y.w() / kBlock;
    require(x.y.h() % 16 == 0 && x.y.w() % 16 == 0, ErrorKind::dimension,
            "luma plane dimensions must be multiples of 16");
    require(x.cb.h() * 2 == x.y.h() && x.cb.w() * 2 == x.y.w() && x.cr.dims() == x.cb.dims(), ErrorKind::dimension,
            "chroma planes must be half the luma size");
    Tensor<T> out({N, std::size_t(kFullChannels), gh, gw});
    for (int p = 0; p < kPlanes; ++p) {
      const std::size_t b = bank_of(p);
      Tensor<T> y = nn::conv2d(x.plane(p), weights_[b].value, geometry());
      nn::add_channel_bias(y, biases_[b].value);
      const std::size_t up = p == 0 ? 1 : 2;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < std::size_t(kBlockArea); ++k)
          for (std::size_t r = 0; r < gh; ++r)
            for (std::size_t c = 0; c < gw; ++c) out.at(n, p * kBlockArea + k, r, c) = y.at(n, k, r / up, c / up);
    }
    return out;
  }

  // Accumulates weight/bias gradients; the planes themselves are not trained.
  void backward(const Tensor<T>& dy) {
    const std::size_t N = dy.n(), gh = dy.h(), gw = dy.w();
    for (int p = 0; p < kPlanes; ++p) {
      const std::size_t b = bank_of(p);
      const std::size_t up = p == 0 ? 1 : 2;
      Tensor<T> g({N, std::size_t(kBlockArea), gh / up, gw / up});
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < std::size_t(kBlockArea); ++k)
          for (std::size_t r = 0; r < gh; ++r)
            for (std::size_t c = 0; c < gw; ++c) g.at(n, k, r / up, c / up) += dy.at(n, p * kBlockArea + k, r, c);
      nn::conv2d_backward(x_.plane(p), weights_[b].value, geometry(), g, static_cast<Tensor<T>*>(nullptr), &weights_[b].grad);
      nn::channel_bias_backward(g, biases_[b].grad);
    }
  }

  void collect(StateList<T>& out, const std::string& prefix) {
    for (std::size_t b = 0; b < banks(); ++b) {
      nn::add_param(out, prefix, weights_[b]);
      nn::add_param(out, prefix, biases_[b]);
    }
  }

 private:
  static nn::ConvGeometry geometry() { return {kBlock, 0, 1}; }
  std::size_t bank_of(int plane) const { return kind_ == FrontKind::shared ? 0 : std::size_t(plane); }

  FrontKind kind_;
  std::vector<nn::Parameter<T>> weights_;
  std::vector<nn::Parameter<T>> biases_;
  PlaneBatch<T> x_;
};

// Learnable front feeding a DCT-domain body network.
template <class T>
class LeFunModel {
 public:
  LeFunModel(const ArchSpec& spec, FrontKind kind, std::uint64_t seed) : body_(spec, seed) {
    require(spec.input.is_full(), ErrorKind::config, "learnable front needs a 192-channel body");
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    front_ = std::make_unique<LearnableFront<T>>(kind, rng);
  }

  LearnableFront<T>& front() { return *front_; }
  Model<T>& body() { return body_; }

  // Frozen body: its parameters stay fixed and it runs with inference-mode
  // batch norm so running statistics are untouched.
  void freeze_body(bool frozen) {
    frozen_ = frozen;
    body_.set_trainable(!frozen);
  }
  bool body_frozen() const { return frozen_; }

  Tensor<T> forward(const PlaneBatch<T>& x, Context& ctx) {
    Context body_ctx = ctx;
    if (frozen_) body_ctx.mode = nn::Mode::eval;
    return body_.forward(front_->forward(x), body_ctx);
  }

  void backward(const Tensor<T>& dlogits) { front_->backward(body_.backward(dlogits)); }

  StateList<T> state() {
    StateList<T> out;
    front_->collect(out, "front.");
    for (auto& e : body_.state()) out.push_back(e);
    return out;
  }

  std::vector<nn::Parameter<T>*> parameters() { return nn::parameters_of(state()); }

 private:
  Model<T> body_;
  std::unique_ptr<LearnableFront<T>> front_;
  bool frozen_ = false;
};

}  // namespace fun::arch
