#pragma once

// Stateful layers with cached forward activations for reverse-mode gradients.

#include <memory>
#include <string>
#include <vector>

#include "fun/nn/ops.hpp"

namespace fun::nn {

struct Context {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;
  double bn_momentum = -1.0;  // >= 0 overrides every batch norm's momentum
};

// One serializable tensor; param is null for buffers such as BN running stats.
template <class T>
struct StateEntry {
  std::string name;
  Tensor<T>* tensor = nullptr;
  Parameter<T>* param = nullptr;
};

template <class T>
using StateList = std::vector<StateEntry<T>>;

template <class T>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Context& ctx) = 0;
  // Accumulates parameter gradients and returns the gradient w.r.t. the
  // input of the most recent forward call.
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  // Parameters and buffers in declaration order.
  virtual void collect(StateList<T>& out, const std::string& prefix) = 0;
};

template <class T>
void add_param(StateList<T>& out, const std::string& prefix, Parameter<T>& p) {
  out.push_back({prefix + p.name, &p.value, &p});
}

template <class T>
void add_buffer(StateList<T>& out, const std::string& name, Tensor<T>& t) {
  out.push_back({name, &t, nullptr});
}

template <class T>
std::vector<Parameter<T>*> parameters_of(const StateList<T>& state) {
  std::vector<Parameter<T>*> ps;
  for (const auto& e : state)
    if (e.param) ps.push_back(e.param);
  return ps;
}

// Fan-out normal init: std = sqrt(2 / (k*k*out/groups)).
template <class T>
void init_fan_out_normal(Tensor<T>& w, std::size_t groups, Rng& rng) {
  const double fan_out = double(w.dim(0) / groups * w.dim(2) * w.dim(3));
  const double stddev = std::sqrt(2.0 / fan_out);
  for (T& v : w.data()) v = T(rng.normal(0.0, stddev));
}

template <class T>
class Conv2d final : public Module<T> {
 public:
  Conv2d(std::size_t in, std::size_t out, std::size_t k, int stride, int groups, bool bias, Rng& rng,
         int padding = -1)
      : geom_{stride, padding < 0 ? int(k - 1) / 2 : padding, groups},
        weight_("weight", Tensor<T>({out, in / std::size_t(groups), k, k})),
        has_bias_(bias) {
    init_fan_out_normal(weight_.value, std::size_t(groups), rng);
    if (bias) bias_ = Parameter<T>("bias", Tensor<T>({out}));
  }

  Tensor<T> forward(const Tensor<T>& x, Context&) override {
    x_ = x;
    Tensor<T> y = conv2d(x, weight_.value, geom_);
    if (has_bias_) add_channel_bias(y, bias_.value);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(x_.dims());
    conv2d_backward(x_, weight_.value, geom_, dy, &dx, &weight_.grad);
    if (has_bias_) channel_bias_backward(dy, bias_.grad);
    return dx;
  }

  void collect(StateList<T>& out, const std::string& prefix) override {
    add_param(out, prefix, weight_);
    if (has_bias_) add_param(out, prefix, bias_);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }
  const ConvGeometry& geometry() const { return geom_; }

 private:
  ConvGeometry geom_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  bool has_bias_;
  Tensor<T> x_;
};

template <class T>
class BatchNorm2d final : public Module<T> {
 public:
  explicit BatchNorm2d(std::size_t channels, BatchNormOptions opt = {})
      : opt_(opt),
        gamma_("gamma", Tensor<T>({channels}, T(1))),
        beta_("beta", Tensor<T>({channels})),
        running_mean_({channels}),
        running_var_({channels}, T(1)) {}

  Tensor<T> forward(const Tensor<T>& x, Context& ctx) override {
    BatchNormOptions opt = opt_;
    if (ctx.bn_momentum >= 0.0) opt.momentum = ctx.bn_momentum;
    return batchnorm2d(x, gamma_.value, beta_.value, running_mean_, running_var_, ctx.mode, opt, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    return batchnorm2d_backward(cache_, gamma_.value, dy, &gamma_.grad, &beta_.grad);
  }

  void collect(StateList<T>& out, const std::string& prefix) override {
    add_param(out, prefix, gamma_);
    add_param(out, prefix, beta_);
    add_buffer(out, prefix + "running_mean", running_mean_);
    add_buffer(out, prefix + "running_var", running_var_);
  }

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  BatchNormOptions opt_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  BatchNormCache<T> cache_;
};

template <class T>
class ActivationLayer final : public Module<T> {
 public:
  explicit ActivationLayer(Activation a) : act_(a) {}

  Tensor<T> forward(const Tensor<T>& x, Context&) override {
    x_ = x;
    return activate(x, act_);
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return activate_backward(x_, act_, dy); }
  void collect(StateList<T>&, const std::string&) override {}

 private:
  Activation act_;
  Tensor<T> x_;
};

// Global pool -> 1x1 reduce (bias) -> act -> 1x1 expand (bias) -> sigmoid
// -> channelwise scale of the input.
template <class T>
class SqueezeExcite final : public Module<T> {
 public:
  SqueezeExcite(std::size_t channels, std::size_t reduced, Activation act, Rng& rng)
      : reduce_(channels, reduced, 1, 1, 1, true, rng),
        expand_(reduced, channels, 1, 1, 1, true, rng),
        act_(act) {}

  Tensor<T> forward(const Tensor<T>& x, Context& ctx) override {
    x_ = x;
    Tensor<T> s = global_avg_pool(x).reshaped({x.n(), x.c(), 1, 1});
    r_ = reduce_.forward(s, ctx);
    Tensor<T> a = activate(r_, act_);
    e_ = expand_.forward(a, ctx);
    gate_ = activate(e_, Activation::sigmoid);
    Tensor<T> y = x;
    const std::size_t plane = x.h() * x.w();
    for (std::size_t n = 0; n < x.n(); ++n)
      for (std::size_t c = 0; c < x.c(); ++c) {
        const T g = gate_[n * x.c() + c];
        T* p = &y.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) p[i] *= g;
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t N = x_.n(), C = x_.c(), plane = x_.h() * x_.w();
    Tensor<T> dx(x_.dims());
    Tensor<T> dgate({N, C, 1, 1});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const T g = gate_[n * C + c];
        const T* gp = &dy.at(n, c, 0, 0);
        const T* xp = &x_.at(n, c, 0, 0);
        T* o = &dx.at(n, c, 0, 0);
        T s = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          o[i] = gp[i] * g;
          s += gp[i] * xp[i];
        }
        dgate[n * C + c] = s;
      }
    Tensor<T> de = activate_backward(e_, Activation::sigmoid, dgate);
    Tensor<T> da = expand_.backward(de);
    Tensor<T> dr = activate_backward(r_, act_, da);
    Tensor<T> ds = reduce_.backward(dr);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const T g = ds[n * C + c] / T(plane);
        T* o = &dx.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) o[i] += g;
      }
    return dx;
  }

  void collect(StateList<T>& out, const std::string& prefix) override {
    reduce_.collect(out, prefix + "reduce.");
    expand_.collect(out, prefix + "expand.");
  }

  Conv2d<T>& reduce() { return reduce_; }
  Conv2d<T>& expand() { return expand_; }

 private:
  Conv2d<T> reduce_;
  Conv2d<T> expand_;
  Activation act_;
  Tensor<T> x_, r_, e_, gate_;
};

template <class T>
class FullyConnected final : public Module<T> {
 public:
  FullyConnected(std::size_t in, std::size_t out, Rng& rng)
      : weight_("weight", Tensor<T>({out, in})), bias_("bias", Tensor<T>({out})) {
    const double r = 1.0 / std::sqrt(double(in));
    for (T& v : weight_.value.data()) v = T(rng.uniform(-r, r));
    for (T& v : bias_.value.data()) v = T(rng.uniform(-r, r));
  }

  Tensor<T> forward(const Tensor<T>& x, Context&) override {
    x_ = x;
    return fc(x, weight_.value, bias_.value);
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    return fc_backward(x_, weight_.value, dy, &weight_.grad, &bias_.grad);
  }
  void collect(StateList<T>& out, const std::string& prefix) override {
    add_param(out, prefix, weight_);
    add_param(out, prefix, bias_);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> x_;
};

}  // namespace fun::nn
