#pragma once

// Forward/backward kernels for the operator set the FUN architectures use.
// Every kernel accumulates in a fixed order, so results are bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "fun/nn/tensor.hpp"

namespace fun::nn {

enum class Mode { train, eval };

// Seeded generator with a platform-independent uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller, one draw per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------- conv2d

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, int stride, int pad) {
  long v = (long(in) + 2L * pad - long(k)) / stride + 1;
  require(v >= 1, ErrorKind::dimension, "convolution output extent < 1");
  return std::size_t(v);
}

namespace detail {

struct ConvDims {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo, cpg_in, cpg_out;
};

template <class T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  require(g.groups >= 1 && g.stride >= 1 && g.padding >= 0, ErrorKind::dimension, "bad conv geometry");
  const std::size_t groups = std::size_t(g.groups);
  ConvDims d{};
  d.n = x.n();
  d.cin = x.c();
  d.h = x.h();
  d.w = x.w();
  d.cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  require(d.cin % groups == 0 && d.cout % groups == 0, ErrorKind::dimension,
          "conv2d channels not divisible by groups");
  d.cpg_in = d.cin / groups;
  d.cpg_out = d.cout / groups;
  if (!(w.dim(1) == d.cpg_in)) fail(ErrorKind::dimension,
          "conv2d weight input extent " + std::to_string(w.dim(1)) + " != C/groups " +
              std::to_string(d.cpg_in));
  d.ho = conv_out_extent(d.h, d.kh, g.stride, g.padding);
  d.wo = conv_out_extent(d.w, d.kw, g.stride, g.padding);
  return d;
}

// Output columns ow with 0 <= ow*s - p + k < width.
inline void valid_range(std::size_t out, std::size_t in, int stride, int pad, std::size_t k,
                        std::size_t& lo, std::size_t& hi) {
  long first = long(pad) - long(k);
  long l = first <= 0 ? 0 : (first + stride - 1) / stride;
  long last = long(in) - 1 + pad - long(k);  // ow*s <= last
  long h = last < 0 ? -1 : last / stride;
  if (h > long(out) - 1) h = long(out) - 1;
  lo = std::size_t(l);
  hi = h < l ? lo : std::size_t(h + 1);
}

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// NCHW buffer -> C x (N*P) matrix.
template <class T>
RowMat<T> channels_by_pixels(const T* src, std::size_t n, std::size_t c, std::size_t plane) {
  RowMat<T> m(Eigen::Index(c), Eigen::Index(n * plane));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + (i * c + ch) * plane, plane, m.data() + ch * n * plane + i * plane);
  return m;
}

template <class T>
void scatter_channels(const RowMat<T>& m, T* dst, std::size_t n, std::size_t c, std::size_t plane, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* row = m.data() + ch * n * plane + i * plane;
      T* out = dst + (i * c + ch) * plane;
      if (accumulate) {
        for (std::size_t k = 0; k < plane; ++k) out[k] += row[k];
      } else {
        std::copy_n(row, plane, out);
      }
    }
}

}  // namespace detail

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g) {
  const auto d = detail::conv_dims(x, w, g);
  Tensor<T> y({d.n, d.cout, d.ho, d.wo});
  const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t in_plane = d.h * d.w, out_plane = d.ho * d.wo;
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  T* yd = y.data().data();
  if (pointwise && g.groups == 1) {
    // One GEMM over the whole batch: (Cout x Cin) * (Cin x N*P).
    detail::ConstMatMap<T> wm(wd, Eigen::Index(d.cout), Eigen::Index(d.cin));
    const detail::RowMat<T> ym = wm * detail::channels_by_pixels(xd, d.n, d.cin, in_plane);
    detail::scatter_channels(ym, yd, d.n, d.cout, out_plane, false);
    return y;
  }
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
      const std::size_t grp = oc / d.cpg_out;
      T* yp = yd + (n * d.cout + oc) * out_plane;
      for (std::size_t ic = 0; ic < d.cpg_in; ++ic) {
        const T* xp = xd + (n * d.cin + grp * d.cpg_in + ic) * in_plane;
        const T* wp = wd + (oc * d.cpg_in + ic) * d.kh * d.kw;
        if (pointwise) {
          const T wv = wp[0];
          for (std::size_t i = 0; i < out_plane; ++i) yp[i] += wv * xp[i];
          continue;
        }
        for (std::size_t ky = 0; ky < d.kh; ++ky) {
          std::size_t oy_lo, oy_hi;
          detail::valid_range(d.ho, d.h, g.stride, g.padding, ky, oy_lo, oy_hi);
          for (std::size_t kx = 0; kx < d.kw; ++kx) {
            std::size_t ox_lo, ox_hi;
            detail::valid_range(d.wo, d.w, g.stride, g.padding, kx, ox_lo, ox_hi);
            const T wv = wp[ky * d.kw + kx];
            for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
              const long xrow = (long(oy * g.stride + ky) - g.padding) * long(d.w) + long(kx) - g.padding;
              T* yr = yp + oy * d.wo;
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yr[ox] += wv * xp[xrow + long(ox * g.stride)];
            }
          }
        }
      }
    }
  }
  return y;
}

// Accumulates into *dx / *dw when non-null (they must be pre-shaped).
template <class T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g,
                     const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw) {
  const auto d = detail::conv_dims(x, w, g);
  require(dy.dims() == Shape({d.n, d.cout, d.ho, d.wo}), ErrorKind::dimension, "conv2d grad shape");
  const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.padding == 0;
  const std::size_t in_plane = d.h * d.w, out_plane = d.ho * d.wo;
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  const T* gd = dy.data().data();
  T* dxd = dx ? dx->data().data() : nullptr;
  T* dwd = dw ? dw->data().data() : nullptr;
  if (pointwise && g.groups == 1) {
    detail::ConstMatMap<T> wm(wd, Eigen::Index(d.cout), Eigen::Index(d.cin));
    const detail::RowMat<T> gm = detail::channels_by_pixels(gd, d.n, d.cout, out_plane);
    if (dxd) detail::scatter_channels<T>(wm.transpose() * gm, dxd, d.n, d.cin, in_plane, true);
    if (dwd) {
      detail::MatMap<T> dwm(dwd, Eigen::Index(d.cout), Eigen::Index(d.cin));
      dwm.noalias() += gm * detail::channels_by_pixels(xd, d.n, d.cin, in_plane).transpose();
    }
    return;
  }
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
      const std::size_t grp = oc / d.cpg_out;
      const T* gp = gd + (n * d.cout + oc) * out_plane;
      for (std::size_t ic = 0; ic < d.cpg_in; ++ic) {
        const std::size_t xoff = (n * d.cin + grp * d.cpg_in + ic) * in_plane;
        const T* xp = xd + xoff;
        T* dxp = dxd ? dxd + xoff : nullptr;
        const std::size_t woff = (oc * d.cpg_in + ic) * d.kh * d.kw;
        if (pointwise) {
          const T wv = wd[woff];
          if (dxp) {
            for (std::size_t i = 0; i < out_plane; ++i) dxp[i] += wv * gp[i];
          }
          if (dwd) {
            T s = 0;
            for (std::size_t i = 0; i < out_plane; ++i) s += gp[i] * xp[i];
            dwd[woff] += s;
          }
          continue;
        }
        for (std::size_t ky = 0; ky < d.kh; ++ky) {
          std::size_t oy_lo, oy_hi;
          detail::valid_range(d.ho, d.h, g.stride, g.padding, ky, oy_lo, oy_hi);
          for (std::size_t kx = 0; kx < d.kw; ++kx) {
            std::size_t ox_lo, ox_hi;
            detail::valid_range(d.wo, d.w, g.stride, g.padding, kx, ox_lo, ox_hi);
            const T wv = wd[woff + ky * d.kw + kx];
            T s = 0;
            for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
              const long xrow = (long(oy * g.stride + ky) - g.padding) * long(d.w) + long(kx) - g.padding;
              const T* gr = gp + oy * d.wo;
              if (dxp) {
                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) dxp[xrow + long(ox * g.stride)] += wv * gr[ox];
              }
              if (dwd) {
                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) s += gr[ox] * xp[xrow + long(ox * g.stride)];
              }
            }
            if (dwd) dwd[woff + ky * d.kw + kx] += s;
          }
        }
      }
    }
  }
}

// Adds a per-channel bias in place.
template <class T>
void add_channel_bias(Tensor<T>& y, const Tensor<T>& bias) {
  require(bias.size() == y.c(), ErrorKind::dimension, "bias extent != channels");
  const std::size_t plane = y.h() * y.w();
  for (std::size_t n = 0; n < y.n(); ++n)
    for (std::size_t c = 0; c < y.c(); ++c) {
      T* p = &y.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
    }
}

template <class T>
void channel_bias_backward(const Tensor<T>& dy, Tensor<T>& dbias) {
  const std::size_t plane = dy.h() * dy.w();
  for (std::size_t n = 0; n < dy.n(); ++n)
    for (std::size_t c = 0; c < dy.c(); ++c) {
      const T* p = &dy.at(n, c, 0, 0);
      T s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      dbias[c] += s;
    }
}

// ------------------------------------------------------------- batchnorm

template <class T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  Mode mode = Mode::eval;
};

struct BatchNormOptions {
  double momentum = 0.01;
  double eps = 1e-3;
};

template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                      const BatchNormOptions& opt, BatchNormCache<T>* cache = nullptr) {
  require_rank(x, 4, "batchnorm2d input");
  const std::size_t C = x.c(), N = x.n(), plane = x.h() * x.w();
  require(gamma.size() == C && beta.size() == C && running_mean.size() == C && running_var.size() == C,
          ErrorKind::dimension, "batchnorm2d parameter extent != channels");
  const std::size_t M = N * plane;
  Tensor<T> y(x.dims());
  Tensor<T> xhat(x.dims());
  std::vector<T> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = &x.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / double(M);
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = &x.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          double dv = p[i] - mean;
          ss += dv * dv;
        }
      }
      var = ss / double(M);
      const double unbiased = M > 1 ? ss / double(M - 1) : var;
      running_mean[c] = T((1.0 - opt.momentum) * running_mean[c] + opt.momentum * mean);
      running_var[c] = T((1.0 - opt.momentum) * running_var[c] + opt.momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T is = T(1.0 / std::sqrt(var + opt.eps));
    inv_std[c] = is;
    const T m = T(mean);
    for (std::size_t n = 0; n < N; ++n) {
      const T* p = &x.at(n, c, 0, 0);
      T* hp = &xhat.at(n, c, 0, 0);
      T* yp = &y.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        hp[i] = (p[i] - m) * is;
        yp[i] = gamma[c] * hp[i] + beta[c];
      }
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

template <class T>
Tensor<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& dy,
                               Tensor<T>* dgamma, Tensor<T>* dbeta) {
  const Tensor<T>& xhat = cache.xhat;
  require_same_dims(xhat, dy, "batchnorm2d grad");
  const std::size_t C = dy.c(), N = dy.n(), plane = dy.h() * dy.w();
  const double M = double(N * plane);
  Tensor<T> dx(dy.dims());
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* g = &dy.at(n, c, 0, 0);
      const T* h = &xhat.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += double(g[i]) * h[i];
      }
    }
    if (dgamma) (*dgamma)[c] += T(sum_dy_xhat);
    if (dbeta) (*dbeta)[c] += T(sum_dy);
    const T scale = gamma[c] * cache.inv_std[c];
    if (cache.mode == Mode::train) {
      const T mean_dy = T(sum_dy / M), mean_dy_xhat = T(sum_dy_xhat / M);
      for (std::size_t n = 0; n < N; ++n) {
        const T* g = &dy.at(n, c, 0, 0);
        const T* h = &xhat.at(n, c, 0, 0);
        T* o = &dx.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) o[i] = scale * (g[i] - mean_dy - h[i] * mean_dy_xhat);
      }
    } else {
      for (std::size_t n = 0; n < N; ++n) {
        const T* g = &dy.at(n, c, 0, 0);
        T* o = &dx.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) o[i] = scale * g[i];
      }
    }
  }
  return dx;
}

// ----------------------------------------------------------- activations

enum class Activation { none, relu, swish, sigmoid };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

template <class T>
T sigmoid_scalar(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
  Tensor<T> y = x;
  auto d = y.data();
  switch (a) {
    case Activation::none: break;
    case Activation::relu:
      for (T& v : d) v = v > T(0) ? v : T(0);
      break;
    case Activation::swish:
      for (T& v : d) v = v * sigmoid_scalar(v);
      break;
    case Activation::sigmoid:
      for (T& v : d) v = sigmoid_scalar(v);
      break;
  }
  return y;
}

template <class T>
Tensor<T> swish(const Tensor<T>& x) { return activate(x, Activation::swish); }
template <class T>
Tensor<T> relu(const Tensor<T>& x) { return activate(x, Activation::relu); }
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) { return activate(x, Activation::sigmoid); }

// Gradient w.r.t. the activation input x.
template <class T>
Tensor<T> activate_backward(const Tensor<T>& x, Activation a, const Tensor<T>& dy) {
  require_same_dims(x, dy, "activation grad");
  Tensor<T> dx = dy;
  auto o = dx.data();
  auto in = x.data();
  switch (a) {
    case Activation::none: break;
    case Activation::relu:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T(0) ? o[i] : T(0);
      break;
    case Activation::swish:
      for (std::size_t i = 0; i < o.size(); ++i) {
        const T s = sigmoid_scalar(in[i]);
        o[i] *= s + in[i] * s * (T(1) - s);
      }
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < o.size(); ++i) {
        const T s = sigmoid_scalar(in[i]);
        o[i] *= s * (T(1) - s);
      }
      break;
  }
  return dx;
}

// ---------------------------------------------------------- pooling / fc

template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x, 4, "global_avg_pool input");
  const std::size_t plane = x.h() * x.w();
  Tensor<T> y({x.n(), x.c()});
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* p = &x.at(n, c, 0, 0);
      T s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      y[n * x.c() + c] = s / T(plane);
    }
  return y;
}

template <class T>
Tensor<T> global_avg_pool_backward(const Shape& x_dims, const Tensor<T>& dy) {
  Tensor<T> dx(x_dims);
  const std::size_t plane = dx.h() * dx.w();
  require(dy.size() == dx.n() * dx.c(), ErrorKind::dimension, "pool grad shape");
  for (std::size_t n = 0; n < dx.n(); ++n)
    for (std::size_t c = 0; c < dx.c(); ++c) {
      const T g = dy[n * dx.c() + c] / T(plane);
      T* p = &dx.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) p[i] = g;
    }
  return dx;
}

// x: (N, In); w: (Out, In); b: (Out).
template <class T>
Tensor<T> fc(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(x, 2, "fc input");
  require_rank(w, 2, "fc weight");
  const std::size_t N = x.dim(0), in = x.dim(1), out = w.dim(0);
  require(w.dim(1) == in && b.size() == out, ErrorKind::dimension, "fc shape mismatch");
  Tensor<T> y({N, out});
  detail::ConstMatMap<T> xm(&x[0], Eigen::Index(N), Eigen::Index(in));
  detail::ConstMatMap<T> wm(&w[0], Eigen::Index(out), Eigen::Index(in));
  detail::MatMap<T> ym(&y[0], Eigen::Index(N), Eigen::Index(out));
  ym.noalias() = xm * wm.transpose();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < out; ++o) y[n * out + o] += b[o];
  return y;
}

template <class T>
Tensor<T> fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dw,
                      Tensor<T>* db) {
  const std::size_t N = x.dim(0), in = x.dim(1), out = w.dim(0);
  require(dy.dims() == Shape({N, out}), ErrorKind::dimension, "fc grad shape");
  Tensor<T> dx({N, in});
  detail::ConstMatMap<T> xm(&x[0], Eigen::Index(N), Eigen::Index(in));
  detail::ConstMatMap<T> wm(&w[0], Eigen::Index(out), Eigen::Index(in));
  detail::ConstMatMap<T> gm(&dy[0], Eigen::Index(N), Eigen::Index(out));
  detail::MatMap<T> dxm(&dx[0], Eigen::Index(N), Eigen::Index(in));
  dxm.noalias() = gm * wm;
  if (dw) {
    detail::MatMap<T> dwm(&(*dw)[0], Eigen::Index(out), Eigen::Index(in));
    dwm.noalias() += gm.transpose() * xm;
  }
  if (db)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < out; ++o) (*db)[o] += dy[n * out + o];
  return dx;
}

// Mean cross-entropy over the batch; grad receives d(loss)/d(logits).
template <class T>
double softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>* grad) {
  require_rank(logits, 2, "cross-entropy logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  require(labels.size() == N, ErrorKind::dimension, "label count != batch size");
  if (grad) *grad = Tensor<T>(logits.dims());
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    require(labels[n] >= 0 && std::size_t(labels[n]) < K, ErrorKind::dimension, "label out of range");
    const T* row = &logits[n * K];
    double mx = row[0];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, double(row[k]));
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(double(row[k]) - mx);
    const double lse = mx + std::log(z);
    total += lse - double(row[labels[n]]);
    if (grad) {
      for (std::size_t k = 0; k < K; ++k) {
        double p = std::exp(double(row[k]) - lse);
        (*grad)[n * K + k] = T((p - (std::size_t(labels[n]) == k ? 1.0 : 0.0)) / double(N));
      }
    }
  }
  return total / double(N);
}

// ------------------------------------------------------ stochastic depth

// Per-sample residual scales: 1/survive_p when kept, 0 when dropped (train);
// 1 in eval mode. Consumes exactly one draw per sample in train mode.
inline std::vector<double> stochastic_depth_scales(std::size_t batch, double survive_p, Mode mode, Rng& rng) {
  require(survive_p > 0.0 && survive_p <= 1.0, ErrorKind::dimension, "survive_p must lie in (0,1]");
  std::vector<double> s(batch, 1.0);
  if (mode == Mode::eval || survive_p == 1.0) return s;
  for (auto& v : s) v = rng.uniform() < survive_p ? 1.0 / survive_p : 0.0;
  return s;
}

template <class T>
Tensor<T> stochastic_depth(const Tensor<T>& x, const Tensor<T>& residual, const std::vector<double>& scales) {
  require_same_dims(x, residual, "stochastic_depth");
  require(scales.size() == x.dim(0), ErrorKind::dimension, "stochastic_depth scale count");
  Tensor<T> y = x;
  const std::size_t per = x.size() / x.dim(0);
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    const T s = T(scales[n]);
    for (std::size_t i = 0; i < per; ++i) y[n * per + i] += s * residual[n * per + i];
  }
  return y;
}

template <class T>
Tensor<T> stochastic_depth(const Tensor<T>& x, const Tensor<T>& residual, double survive_p, Mode mode,
                           Rng& rng) {
  return stochastic_depth(x, residual, stochastic_depth_scales(x.dim(0), survive_p, mode, rng));
}

// Gradient w.r.t. the residual branch (the skip path passes dy through).
template <class T>
Tensor<T> stochastic_depth_backward(const Tensor<T>& dy, const std::vector<double>& scales) {
  Tensor<T> dr = dy;
  const std::size_t per = dy.size() / dy.dim(0);
  for (std::size_t n = 0; n < dy.dim(0); ++n) {
    const T s = T(scales[n]);
    for (std::size_t i = 0; i < per; ++i) dr[n * per + i] *= s;
  }
  return dr;
}

}  // namespace fun::nn
