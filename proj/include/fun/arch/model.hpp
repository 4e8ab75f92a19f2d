#pragma once

// Runnable networks built from an ArchSpec.

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fun/arch/spec.hpp"
#include "fun/nn/layers.hpp"

namespace fun::arch {

using nn::Context;
using nn::Module;
using nn::Rng;
using nn::StateList;
using nn::Tensor;

template <class T>
class Sequential final : public Module<T> {
 public:
  template <class M, class... Args>
  M& add(std::string name, Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *m;
    children_.push_back({std::move(name), std::move(m)});
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, Context& ctx) override {
    Tensor<T> h = x;
    for (auto& c : children_) h = c.module->forward(h, ctx);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> g = dy;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) g = it->module->backward(g);
    return g;
  }

  void collect(StateList<T>& out, const std::string& prefix) override {
    for (auto& c : children_) c.module->collect(out, prefix + c.name + ".");
  }

  bool empty() const { return children_.empty(); }

 private:
  struct Child {
    std::string name;
    std::unique_ptr<Module<T>> module;
  };
  std::vector<Child> children_;
};

// Residual wrapper: y = shortcut(x) + scale * body(x), with per-sample
// stochastic-depth scales when the shortcut is the identity.
template <class T>
class ResidualBlock final : public Module<T> {
 public:
  ResidualBlock(bool skip, bool projection, nn::Activation post_act)
      : skip_(skip), projection_(projection), post_act_(post_act) {}

  Sequential<T>& body() { return body_; }
  Sequential<T>& shortcut() { return shortcut_; }
  bool has_skip() const { return skip_; }
  void set_survival(double p) { survive_ = p; }
  double survival() const { return survive_; }

  Tensor<T> forward(const Tensor<T>& x, Context& ctx) override {
    Tensor<T> y = body_.forward(x, ctx);
    if (skip_) {
      Rng fallback(0);
      scales_ = nn::stochastic_depth_scales(x.dim(0), survive_, ctx.mode, ctx.rng ? *ctx.rng : fallback);
      y = nn::stochastic_depth(x, y, scales_);
    } else if (projection_) {
      nn::add_inplace(y, shortcut_.forward(x, ctx));
    }
    if (post_act_ != nn::Activation::none) {
      pre_act_ = y;
      y = nn::activate(y, post_act_);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy_in) override {
    Tensor<T> dy = post_act_ != nn::Activation::none ? nn::activate_backward(pre_act_, post_act_, dy_in) : dy_in;
    if (skip_) {
      Tensor<T> dx = body_.backward(nn::stochastic_depth_backward(dy, scales_));
      nn::add_inplace(dx, dy);
      return dx;
    }
    Tensor<T> dx = body_.backward(dy);
    if (projection_) nn::add_inplace(dx, shortcut_.backward(dy));
    return dx;
  }

  void collect(StateList<T>& out, const std::string& prefix) override {
    body_.collect(out, prefix);
    if (projection_) shortcut_.collect(out, prefix + "shortcut.");
  }

 private:
  bool skip_;
  bool projection_;
  nn::Activation post_act_;
  double survive_ = 1.0;
  Sequential<T> body_;
  Sequential<T> shortcut_;
  std::vector<double> scales_;
  Tensor<T> pre_act_;
};

template <class T>
void add_conv_bn(Sequential<T>& seq, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                 int stride, int groups, Rng& rng) {
  seq.template add<nn::Conv2d<T>>(name + ".conv", in, out, k, stride, groups, false, rng);
  seq.template add<nn::BatchNorm2d<T>>(name + ".bn", out);
}

template <class T>
std::unique_ptr<ResidualBlock<T>> make_block(const BlockPlan& p, nn::Activation act, Rng& rng) {
  const std::size_t cin = p.in_channels, cout = p.spec.out_channels, mid = p.mid_channels, k = p.spec.kernel;
  const int s = p.spec.stride;
  std::unique_ptr<ResidualBlock<T>> b;
  switch (p.spec.op) {
    case BlockOp::mbconv: {
      b = std::make_unique<ResidualBlock<T>>(p.skip, false, nn::Activation::none);
      auto& body = b->body();
      if (p.spec.expansion != 1) {
        add_conv_bn(body, "expand", cin, mid, 1, 1, 1, rng);
        body.template add<nn::ActivationLayer<T>>("expand.act", act);
      }
      add_conv_bn(body, "dw", mid, mid, k, s, int(mid), rng);
      body.template add<nn::ActivationLayer<T>>("dw.act", act);
      if (p.se_channels > 0) body.template add<nn::SqueezeExcite<T>>("se", mid, p.se_channels, act, rng);
      add_conv_bn(body, "project", mid, cout, 1, 1, 1, rng);
      break;
    }
    case BlockOp::bottleneck: {
      b = std::make_unique<ResidualBlock<T>>(p.skip, !p.skip, act);
      auto& body = b->body();
      add_conv_bn(body, "reduce", cin, mid, 1, 1, 1, rng);
      body.template add<nn::ActivationLayer<T>>("reduce.act", act);
      add_conv_bn(body, "conv", mid, mid, k, s, 1, rng);
      body.template add<nn::ActivationLayer<T>>("conv.act", act);
      add_conv_bn(body, "expand", mid, cout, 1, 1, 1, rng);
      if (!p.skip) add_conv_bn(b->shortcut(), "proj", cin, cout, 1, s, 1, rng);
      break;
    }
    case BlockOp::conv_bn_act: {
      b = std::make_unique<ResidualBlock<T>>(false, false, nn::Activation::none);
      auto& body = b->body();
      add_conv_bn(body, "stem", cin, cout, k, s, 1, rng);
      body.template add<nn::ActivationLayer<T>>("stem.act", act);
      break;
    }
  }
  return b;
}

// Per-channel input standardization applied to the raw DCT tensor.
struct InputNorm {
  std::vector<float> mean;
  std::vector<float> stddev;

  static InputNorm identity(std::size_t channels) { return {std::vector<float>(channels, 0.0f), std::vector<float>(channels, 1.0f)}; }
  friend bool operator==(const InputNorm&, const InputNorm&) = default;
};

template <class T>
class Model {
 public:
  Model(const ArchSpec& spec, std::uint64_t seed) : spec_(spec), norm_(InputNorm::identity(spec.in_channels())) {
    validate(spec_);
    Rng rng(seed);
    plan_ = plan_blocks(spec_);
    for (const auto& p : plan_) blocks_.push_back(make_block<T>(p, spec_.act, rng));
    std::size_t c = std::size_t(final_channels(spec_));
    if (spec_.head_width > 0) {
      add_conv_bn(head_, "conv", c, std::size_t(spec_.head_width), 1, 1, 1, rng);
      head_.template add<nn::ActivationLayer<T>>("act", spec_.act);
      c = std::size_t(spec_.head_width);
    }
    fc_ = std::make_unique<nn::FullyConnected<T>>(c, std::size_t(spec_.num_classes), rng);
    set_stochastic_depth(0.0);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ArchSpec& spec() const { return spec_; }
  const std::vector<BlockPlan>& plan() const { return plan_; }
  std::size_t depth() const { return blocks_.size(); }
  ResidualBlock<T>& block(std::size_t i) { return *blocks_.at(i); }

  const InputNorm& norm() const { return norm_; }
  void set_norm(InputNorm n) {
    require(n.mean.size() == std::size_t(spec_.in_channels()) && n.stddev.size() == n.mean.size(),
            ErrorKind::dimension, "normalization stats do not match input channels");
    for (auto& s : n.stddev)
      if (!(s > 0.0f)) s = 1.0f;
    norm_ = std::move(n);
  }

  // Drop rate ramps linearly from 0 at the first block to max_drop at the last.
  void set_stochastic_depth(double max_drop) {
    max_drop_ = max_drop;
    const std::size_t B = blocks_.size();
    for (std::size_t i = 0; i < B; ++i) {
      const double drop = B > 1 ? max_drop * double(i) / double(B - 1) : 0.0;
      blocks_[i]->set_survival(1.0 - drop);
    }
  }
  double stochastic_depth() const { return max_drop_; }

  // x: N x C x grid_h x grid_w raw DCT coefficients.
  Tensor<T> forward(const Tensor<T>& x, Context& ctx) {
    nn::require_rank(x, 4, "model input");
    if (!(x.c() == std::size_t(spec_.in_channels()) && x.h() == std::size_t(spec_.grid_h) &&
                x.w() == std::size_t(spec_.grid_w))) fail(ErrorKind::dimension,
            "model " + spec_.name + " expects input (N x " + std::to_string(spec_.in_channels()) + " x " +
                std::to_string(spec_.grid_h) + " x " + std::to_string(spec_.grid_w) + "), got " +
                nn::to_string(x.dims()));
    Tensor<T> h = x;
    const std::size_t plane = x.h() * x.w();
    for (std::size_t n = 0; n < x.n(); ++n)
      for (std::size_t c = 0; c < x.c(); ++c) {
        const T m = T(norm_.mean[c]), is = T(1.0 / double(norm_.stddev[c]));
        T* p = &h.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * is;
      }
    for (auto& b : blocks_) h = b->forward(h, ctx);
    if (!head_.empty()) h = head_.forward(h, ctx);
    pooled_dims_ = h.dims();
    return fc_->forward(nn::global_avg_pool(h), ctx);
  }

  // Returns the gradient w.r.t. the raw input of the last forward call.
  Tensor<T> backward(const Tensor<T>& dlogits) {
    Tensor<T> g = nn::global_avg_pool_backward(pooled_dims_, fc_->backward(dlogits));
    if (!head_.empty()) g = head_.backward(g);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    const std::size_t plane = g.h() * g.w();
    for (std::size_t n = 0; n < g.n(); ++n)
      for (std::size_t c = 0; c < g.c(); ++c) {
        const T is = T(1.0 / double(norm_.stddev[c]));
        T* p = &g.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) p[i] *= is;
      }
    return g;
  }

  // Parameters and buffers in declaration order.
  StateList<T> state() {
    StateList<T> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i]->collect(out, "blocks." + std::to_string(i) + ".");
    head_.collect(out, "head.");
    fc_->collect(out, "fc.");
    return out;
  }

  std::vector<nn::Parameter<T>*> parameters() { return nn::parameters_of(state()); }

  std::int64_t parameter_count() {
    std::int64_t n = 0;
    for (auto* p : parameters()) n += std::int64_t(p->value.size());
    return n;
  }

  void set_trainable(bool on) {
    for (auto* p : parameters()) p->trainable = on;
  }

 private:
  ArchSpec spec_;
  InputNorm norm_;
  double max_drop_ = 0.0;
  std::vector<BlockPlan> plan_;
  std::vector<std::unique_ptr<ResidualBlock<T>>> blocks_;
  Sequential<T> head_;
  std::unique_ptr<nn::FullyConnected<T>> fc_;
  nn::Shape pooled_dims_;
};

template <class T>
std::unique_ptr<Model<T>> instantiate(const ArchSpec& spec, std::uint64_t seed) {
  return std::make_unique<Model<T>>(spec, seed);
}

// Copies every tensor of src into dst; both must share the same layout.
template <class T>
void copy_state(Model<T>& src, Model<T>& dst) {
  auto a = src.state();
  auto b = dst.state();
  require(a.size() == b.size(), ErrorKind::dimension, "state layouts differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].name == b[i].name && a[i].tensor->dims() == b[i].tensor->dims())) fail(ErrorKind::dimension,
            "state entry mismatch at " + a[i].name);
    *b[i].tensor = *a[i].tensor;
  }
  dst.set_norm(src.norm());
}

}  // namespace fun::arch
