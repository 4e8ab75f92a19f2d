#pragma once

// Training a learnable front in place of the fixed DCT: frozen body
// (front only) or end to end.

#include <memory>
#include <ostream>
#include <sstream>
#include <string>

#include "fun/arch/lefun.hpp"
#include "fun/train/trainer.hpp"

namespace fun::train {

enum class LefunMode { frozen, end_to_end };
enum class FrontInit { random, dct };

inline const char* to_string(LefunMode m) { return m == LefunMode::frozen ? "frozen" : "e2e"; }

struct PlaneSplit {
  std::vector<PlaneSet> planes;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

inline PlaneSplit make_plane_split(const std::vector<Sample>& items) {
  PlaneSplit s;
  for (const auto& it : items) {
    s.planes.push_back(rgb_to_ycbcr(it.image));
    s.labels.push_back(it.label);
  }
  return s;
}

template <class T>
arch::PlaneBatch<T> gather_planes(const PlaneSplit& split, const std::vector<std::size_t>& idx) {
  std::vector<const PlaneSet*> items;
  for (auto i : idx) items.push_back(&split.planes[i]);
  return arch::make_plane_batch<T>(items);
}

template <class T>
double evaluate(arch::LeFunModel<T>& model, const PlaneSplit& split, int batch_size = 64) {
  return evaluate_with(model, split.size(), split.labels, [&](const std::vector<std::size_t>& idx) {
    return gather_planes<T>(split, idx);
  }, batch_size);
}

// Re-estimates batch-norm running statistics as the plain average of batch
// statistics over the split, with stochastic depth off.
template <class T>
void recalibrate_bn(arch::LeFunModel<T>& model, const PlaneSplit& split, int batch_size) {
  require(batch_size > 0 && split.size() > 0, ErrorKind::config, "recalibration needs data");
  const double sd = model.body().stochastic_depth();
  model.body().set_stochastic_depth(0.0);
  nn::Rng rng(0);
  nn::Context ctx{nn::Mode::train, &rng};
  int step = 0;
  for (std::size_t start = 0; start < split.size(); start += std::size_t(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(split.size(), start + std::size_t(batch_size)); ++i) idx.push_back(i);
    ctx.bn_momentum = 1.0 / double(++step);
    model.forward(gather_planes<T>(split, idx), ctx);
  }
  model.body().set_stochastic_depth(sd);
}

template <class T>
struct LefunResult {
  std::unique_ptr<arch::LeFunModel<T>> model;
  TrainLog log;
  double top1 = 0.0;
};

// Attaches a front to a copy of the trained static model and trains it.
template <class T>
LefunResult<T> run_lefun(LefunMode mode, arch::Model<T>& base, const PlaneSplit& train_split,
                         const PlaneSplit& test_split, const TrainConfig& cfg,
                         arch::FrontKind kind = arch::FrontKind::shared, FrontInit init = FrontInit::random,
                         std::ostream* log = nullptr) {
  require(base.spec().input.is_full(), ErrorKind::config, "learnable front needs a 192-channel base model");
  LefunResult<T> r;
  r.model = std::make_unique<arch::LeFunModel<T>>(base.spec(), kind, cfg.seed);
  arch::copy_state(base, r.model->body());
  if (init == FrontInit::dct) r.model->front().init_dct_basis();
  r.model->freeze_body(mode == LefunMode::frozen);
  r.model->body().set_stochastic_depth(mode == LefunMode::frozen ? 0.0 : cfg.stochastic_depth_max);
  auto& model = *r.model;
  auto make = [&](const std::vector<std::size_t>& idx, nn::Rng&) { return gather_planes<T>(train_split, idx); };
  // The body's running statistics were fitted to DCT inputs and lag far
  // behind a front that moves, so end-to-end runs refresh them before each test.
  auto eval_test = [&] {
    if (mode == LefunMode::end_to_end) recalibrate_bn(model, train_split, cfg.batch_size);
    return test_split.size() ? evaluate(model, test_split) : 0.0;
  };
  r.log = fit(model, train_split.labels, make, eval_test, cfg, log);
  r.top1 = r.log.epochs.empty() ? eval_test() : r.log.epochs.back().test_top1;
  return r;
}

struct LefunReport {
  double static_top1 = 0.0;
  double frozen_top1 = 0.0;
  double e2e_top1 = 0.0;

  std::string text() const {
    std::ostringstream os;
    os << "static_top1 " << static_top1 << "\n"
       << "lefun_frozen_top1 " << frozen_top1 << "\n"
       << "lefun_e2e_top1 " << e2e_top1 << "\n";
    return os.str();
  }
};

// 8x8 filters of one bank as min-max normalized grayscale images in zigzag
// order; a constant filter maps to mid-gray.
template <class T>
std::vector<GrayImage> filter_images(const nn::Tensor<T>& bank) {
  require(bank.rank() == 4 && bank.dim(1) == 1 && bank.dim(2) == kBlock && bank.dim(3) == kBlock, ErrorKind::dimension,
          "filter bank must be K x 1 x 8 x 8");
  std::vector<GrayImage> out;
  for (std::size_t k = 0; k < bank.dim(0); ++k) {
    const T* w = &bank.at(k, 0, 0, 0);
    T lo = w[0], hi = w[0];
    for (int i = 0; i < kBlockArea; ++i) {
      lo = std::min(lo, w[i]);
      hi = std::max(hi, w[i]);
    }
    GrayImage g;
    g.height = g.width = kBlock;
    g.data.resize(kBlockArea);
    // Relative spread below 1e-6 counts as constant (float rounding of the DC basis).
    const bool flat = double(hi - lo) <= 1e-6 * std::max(1.0, double(std::max(std::abs(lo), std::abs(hi))));
    for (int i = 0; i < kBlockArea; ++i) {
      g.data[std::size_t(i)] =
          flat ? std::uint8_t(128) : std::uint8_t(std::lround(255.0 * double(w[i] - lo) / double(hi - lo)));
    }
    out.push_back(std::move(g));
  }
  return out;
}

// The fixed transform's filters, for comparison with learned ones.
inline nn::Tensor<double> static_dct_bank() {
  nn::Rng rng(0);
  arch::LearnableFront<double> f(arch::FrontKind::shared, rng);
  f.init_dct_basis();
  return f.weight(0).value;
}

}  // namespace fun::train
