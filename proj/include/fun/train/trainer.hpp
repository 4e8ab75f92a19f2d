#pragma once

// Minibatch training and evaluation for DCT-input networks.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "fun/arch/model.hpp"
#include "fun/compression.hpp"
#include "fun/nn/optimizer.hpp"
#include "fun/train/cache.hpp"

namespace fun::train {

enum class ScheduleKind { exponential, step };

struct TrainConfig {
  nn::OptimizerConfig optimizer;
  ScheduleKind schedule = ScheduleKind::exponential;
  nn::ExponentialSchedule exponential;
  nn::StepSchedule step;
  int epochs = 30;
  int batch_size = 32;
  double stochastic_depth_max = 0.2;
  std::uint64_t seed = 1;
  bool fit_normalization = true;
  bool hflip = false;
  // Parameters whose names start with any of these stay fixed.
  std::vector<std::string> freeze_prefixes;
  std::filesystem::path cache_dir;

  double lr(int epoch) const {
    return schedule == ScheduleKind::exponential ? exponential(epoch) : step(epoch);
  }

  // ResNet-style recipe: SGD momentum 0.9, 0.1 -> 0.01 -> 0.001.
  static TrainConfig resfun_preset() {
    TrainConfig c;
    c.optimizer.kind = nn::OptimizerKind::sgd_momentum;
    c.optimizer.momentum = 0.9;
    c.optimizer.weight_decay = 1e-5;
    c.schedule = ScheduleKind::step;
    c.stochastic_depth_max = 0.0;
    return c;
  }
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_top1 = 0.0;
  double test_top1 = 0.0;
};

inline std::string format_record(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch %d lr %.9g train_loss %.6f train_top1 %.4f test_top1 %.4f", r.epoch, r.lr,
                r.train_loss, r.train_top1, r.test_top1);
  return buf;
}

struct TrainLog {
  std::vector<EpochRecord> epochs;

  std::string text() const {
    std::string s;
    for (const auto& r : epochs) s += format_record(r) + "\n";
    return s;
  }
};

// Preprocessed split: full 192-channel tensors plus labels.
struct TensorSplit {
  std::vector<DctTensor> x;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

inline TensorSplit make_split(const std::vector<Sample>& items, const std::filesystem::path& cache_dir = {}) {
  return {preprocess_all(items, CompressionSpec::full(), cache_dir), labels_of(items)};
}

// Gathers the channels a model consumes (its input spec) from full tensors,
// zeroing those outside mask.
template <class T>
nn::Tensor<T> gather_batch(const TensorSplit& split, const std::vector<std::size_t>& idx, const CompressionSpec& input,
                           const CompressionSpec& mask, bool flip = false) {
  require(!idx.empty(), ErrorKind::dimension, "empty batch");
  const DctTensor& first = split.x[idx[0]];
  require(first.spec.is_full(), ErrorKind::dimension, "training tensors must carry all 192 channels");
  const auto channels = kept_channels(input);
  const std::size_t gh = std::size_t(first.grid_h), gw = std::size_t(first.grid_w), plane = gh * gw;
  nn::Tensor<T> b({idx.size(), channels.size(), gh, gw});
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const DctTensor& t = split.x[idx[n]];
    require(t.grid_h == first.grid_h && t.grid_w == first.grid_w && t.spec.is_full(), ErrorKind::dimension,
            "batch mixes tensor shapes");
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const int ch = channels[c];
      const int p = ch / kBlockArea, k = ch % kBlockArea;
      if (k >= mask.keep(p)) continue;
      const float* src = t.data.data() + std::size_t(ch) * plane;
      T* dst = &b.at(n, c, 0, 0);
      if (!flip) {
        for (std::size_t i = 0; i < plane; ++i) dst[i] = T(src[i]);
      } else {
        // Mirroring the image mirrors the block grid and negates odd horizontal frequencies.
        const T sign = zigzag_order()[std::size_t(k)].col % 2 ? T(-1) : T(1);
        for (std::size_t r = 0; r < gh; ++r)
          for (std::size_t cc = 0; cc < gw; ++cc) dst[r * gw + cc] = sign * T(src[r * gw + (gw - 1 - cc)]);
      }
    }
  }
  return b;
}

// Per-channel mean and population std of the training tensors.
inline arch::InputNorm fit_norm(const TensorSplit& split, const CompressionSpec& input) {
  const auto channels = kept_channels(input);
  arch::InputNorm n;
  for (int ch : channels) {
    double s = 0.0, ss = 0.0, count = 0.0;
    for (const auto& t : split.x) {
      const float* p = t.data.data() + std::size_t(ch) * t.plane_size();
      for (std::size_t i = 0; i < t.plane_size(); ++i) {
        s += p[i];
        ss += double(p[i]) * p[i];
      }
      count += double(t.plane_size());
    }
    const double mean = count > 0 ? s / count : 0.0;
    const double var = count > 0 ? std::max(0.0, ss / count - mean * mean) : 1.0;
    const double sd = std::sqrt(var);
    n.mean.push_back(float(mean));
    n.stddev.push_back(sd > 1e-6 ? float(sd) : 1.0f);
  }
  return n;
}

template <class T>
std::size_t argmax_row(const nn::Tensor<T>& logits, std::size_t n) {
  const std::size_t K = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (logits[n * K + k] > logits[n * K + best]) best = k;
  return best;
}

template <class Net, class MakeBatch>
double evaluate_with(Net& net, std::size_t count, const std::vector<int>& labels, MakeBatch make_batch,
                     int batch_size = 64) {
  require(count > 0, ErrorKind::dataset, "evaluation split is empty");
  nn::Context ctx{nn::Mode::eval, nullptr};
  std::size_t correct = 0;
  for (std::size_t start = 0; start < count; start += std::size_t(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(count, start + std::size_t(batch_size)); ++i) idx.push_back(i);
    auto logits = net.forward(make_batch(idx), ctx);
    for (std::size_t n = 0; n < idx.size(); ++n)
      if (int(argmax_row(logits, n)) == labels[idx[n]]) ++correct;
  }
  return double(correct) / double(count);
}

// Top-1 accuracy over a split with inputs masked per spec.
template <class T>
double evaluate(arch::Model<T>& model, const TensorSplit& split, const CompressionSpec& spec = CompressionSpec::full(),
                int batch_size = 64) {
  spec.validate();
  const CompressionSpec input = model.spec().input;
  return evaluate_with(model, split.size(), split.labels, [&](const std::vector<std::size_t>& idx) {
    return gather_batch<T>(split, idx, input, spec);
  }, batch_size);
}

// Mean cross-entropy in inference mode.
template <class T>
double mean_loss(arch::Model<T>& model, const TensorSplit& split, int batch_size = 64) {
  nn::Context ctx{nn::Mode::eval, nullptr};
  double total = 0.0;
  for (std::size_t start = 0; start < split.size(); start += std::size_t(batch_size)) {
    std::vector<std::size_t> idx;
    std::vector<int> lab;
    for (std::size_t i = start; i < std::min(split.size(), start + std::size_t(batch_size)); ++i) {
      idx.push_back(i);
      lab.push_back(split.labels[i]);
    }
    auto logits = model.forward(gather_batch<T>(split, idx, model.spec().input, CompressionSpec::full()), ctx);
    total += nn::softmax_cross_entropy<T>(logits, lab, nullptr) * double(idx.size());
  }
  return total / double(split.size());
}

template <class T>
void apply_freeze(const nn::StateList<T>& state, const std::vector<std::string>& prefixes) {
  for (const auto& e : state) {
    if (!e.param) continue;
    for (const auto& p : prefixes)
      if (e.name.rfind(p, 0) == 0) e.param->trainable = false;
  }
}

// Generic loop. Randomness comes from one generator seeded by cfg.seed:
// per epoch, one Fisher-Yates shuffle of the training order, then per batch
// the stochastic-depth draws (and flip draws when enabled) in forward order.
template <class Net, class MakeBatch, class EvalTest>
TrainLog fit(Net& net, const std::vector<int>& train_labels, MakeBatch make_batch, EvalTest eval_test,
             const TrainConfig& cfg, std::ostream* log = nullptr) {
  using T = typename decltype(net.parameters().front()->value)::value_type;
  require(cfg.batch_size > 0 && cfg.epochs >= 0, ErrorKind::config, "bad batch size or epoch count");
  TrainLog out;
  if (cfg.epochs == 0) return out;
  require(!train_labels.empty(), ErrorKind::dataset, "training split is empty");
  nn::Rng rng(cfg.seed);
  auto params = net.parameters();
  nn::Optimizer<T> opt(cfg.optimizer);
  opt.init(params);
  const std::size_t N = train_labels.size();
  std::vector<std::size_t> order(N);
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = N; i-- > 1;) std::swap(order[i], order[std::size_t(rng.next() % (i + 1))]);
    const double lr = cfg.lr(epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < N; start += std::size_t(cfg.batch_size)) {
      std::vector<std::size_t> idx(order.begin() + std::ptrdiff_t(start),
                                   order.begin() + std::ptrdiff_t(std::min(N, start + std::size_t(cfg.batch_size))));
      std::vector<int> lab;
      for (auto i : idx) lab.push_back(train_labels[i]);
      nn::Context ctx{nn::Mode::train, &rng};
      auto input = make_batch(idx, rng);
      auto logits = net.forward(input, ctx);
      nn::Tensor<T> grad(logits.dims());
      const double loss = nn::softmax_cross_entropy(logits, lab, &grad);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::divergence, "loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(start / std::size_t(cfg.batch_size)) + " (lr " +
                                        std::to_string(lr) + ")");
      }
      loss_sum += loss * double(idx.size());
      for (std::size_t n = 0; n < idx.size(); ++n)
        if (int(argmax_row(logits, n)) == lab[n]) ++correct;
      nn::zero_grads(params);
      net.backward(grad);
      opt.step(params, lr);
    }
    EpochRecord r{epoch, lr, loss_sum / double(N), double(correct) / double(N), eval_test()};
    out.epochs.push_back(r);
    if (log) *log << format_record(r) << "\n" << std::flush;
  }
  return out;
}

template <class T>
TrainLog train(arch::Model<T>& model, const TensorSplit& train_split, const TensorSplit& test_split,
               const TrainConfig& cfg, std::ostream* log = nullptr) {
  const CompressionSpec input = model.spec().input;
  if (cfg.fit_normalization && cfg.epochs > 0) model.set_norm(fit_norm(train_split, input));
  model.set_stochastic_depth(cfg.stochastic_depth_max);
  apply_freeze(model.state(), cfg.freeze_prefixes);
  auto make = [&](const std::vector<std::size_t>& idx, nn::Rng& rng) {
    if (!cfg.hflip) return gather_batch<T>(train_split, idx, input, CompressionSpec::full());
    // Flip decisions are per batch to keep a single tensor layout.
    return gather_batch<T>(train_split, idx, input, CompressionSpec::full(), rng.uniform() < 0.5);
  };
  auto eval_test = [&] { return test_split.size() ? evaluate(model, test_split) : 0.0; };
  return fit(model, train_split.labels, make, eval_test, cfg, log);
}

}  // namespace fun::train
