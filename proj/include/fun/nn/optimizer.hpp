#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fun/nn/tensor.hpp"

namespace fun::nn {

enum class OptimizerKind { sgd_momentum, rmsprop };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd_momentum ? "sgd" : "rmsprop";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double momentum = 0.9;
  double decay = 0.9;  // RMS averaging
  double eps = 1e-3;
  double weight_decay = 1e-5;
  // Starting value of the RMS accumulator (TF initializes it to 1).
  double initial_square_avg = 1.0;
};

// SGD-momentum:  v <- m v + g;                      p <- p - lr v
// RMSProp:       r <- d r + (1-d) g^2;  u <- m u + lr g / sqrt(r + eps);  p <- p - u
// with g += weight_decay * p applied first. Frozen parameters are skipped.
template <class T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  const OptimizerConfig& config() const { return cfg_; }

  void step(const std::vector<Parameter<T>*>& params, double lr) {
    if (slots_.empty()) init(params);
    require(slots_.size() == params.size(), ErrorKind::config, "optimizer bound to a different parameter set");
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i];
      if (!p.trainable) continue;
      Slot& s = slots_[i];
      require(s.momentum.size() == p.value.size(), ErrorKind::dimension, "optimizer slot shape mismatch");
      auto val = p.value.data();
      auto grad = p.grad.data();
      for (std::size_t j = 0; j < val.size(); ++j) {
        const double g = double(grad[j]) + cfg_.weight_decay * double(val[j]);
        if (cfg_.kind == OptimizerKind::sgd_momentum) {
          s.momentum[j] = cfg_.momentum * s.momentum[j] + g;
          val[j] = T(double(val[j]) - lr * s.momentum[j]);
        } else {
          s.square_avg[j] = cfg_.decay * s.square_avg[j] + (1.0 - cfg_.decay) * g * g;
          s.momentum[j] = cfg_.momentum * s.momentum[j] + lr * g / std::sqrt(s.square_avg[j] + cfg_.eps);
          val[j] = T(double(val[j]) - s.momentum[j]);
        }
      }
    }
  }

  // Accumulator access (tests, checkpoint inspection).
  std::vector<double>& momentum_buffer(std::size_t i) { return slots_.at(i).momentum; }
  std::vector<double>& square_avg(std::size_t i) { return slots_.at(i).square_avg; }

  void init(const std::vector<Parameter<T>*>& params) {
    slots_.clear();
    for (auto* p : params) {
      Slot s;
      s.momentum.assign(p->value.size(), 0.0);
      if (cfg_.kind == OptimizerKind::rmsprop) s.square_avg.assign(p->value.size(), cfg_.initial_square_avg);
      slots_.push_back(std::move(s));
    }
  }

 private:
  struct Slot {
    std::vector<double> momentum;
    std::vector<double> square_avg;
  };
  OptimizerConfig cfg_;
  std::vector<Slot> slots_;
};

template <class T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

// lr = lr0 * decay^floor(epoch / epochs_per_decay)
struct ExponentialSchedule {
  double lr0 = 0.048;
  double decay = 0.97;
  double epochs_per_decay = 2.4;

  double operator()(double epoch) const {
    // Guards against 2.4*k landing a hair below the boundary in floating point.
    const double steps = std::floor(epoch / epochs_per_decay + 1e-9);
    return lr0 * std::pow(decay, steps);
  }
};

inline double lr_schedule(double epoch, double epochs_per_decay = 2.4, double decay = 0.97, double lr0 = 0.048) {
  return ExponentialSchedule{lr0, decay, epochs_per_decay}(epoch);
}

// Piecewise-constant schedule (ResFUN: 0.1 for 90 epochs, 0.01 for 20, 0.001 after).
struct StepSchedule {
  std::vector<double> boundaries{90.0, 110.0};
  std::vector<double> values{0.1, 0.01, 0.001};

  double operator()(double epoch) const {
    std::size_t i = 0;
    while (i < boundaries.size() && epoch >= boundaries[i]) ++i;
    return values[std::min(i, values.size() - 1)];
  }
};

}  // namespace fun::nn
