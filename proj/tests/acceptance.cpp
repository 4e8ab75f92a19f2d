// Acceptance run: one PASS/FAIL line per criterion with the measured values.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grad_check.hpp"
#include "fun/arch/accounting.hpp"
#include "fun/train/lefun.hpp"
#include "fun/train/sweep.hpp"
#include "fun/weights.hpp"

using namespace fun;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol * target; }

// ---------------------------------------------------------------- 1, 2

void criterion_params() {
  struct Row {
    const char* name;
    double target, tol;
  };
  const Row rows[] = {{"efun-variant-a", 5.3e6, 0.05},
                      {"efun-variant-b", 5.6e6, 0.05},
                      {"efun", 4.2e6, 0.10},
                      {"efun-l", 6.2e6, 0.15},
                      {"resfun", 10.4e6, 0.15}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const auto t0 = Clock::now();
    const double p = double(arch::count_params(arch::builtin(r.name)));
    const double sec = seconds_since(t0);
    const bool good = within(p, r.target, r.tol) && sec < 1.0;
    ok = ok && good;
    detail += std::string(r.name) + " " + fmt("%.3fM", p / 1e6) + " (target " + fmt("%.1fM", r.target / 1e6) +
              fmt(" +-%.0f%%", r.tol * 100) + fmt(", %.4fs) ", sec);
  }
  report(1, "parameter accounting", ok, detail);
}

void criterion_flops() {
  const auto t0 = Clock::now();
  const double e = double(arch::count_flops(arch::builtin("efun"), 28, 28));
  const double l = double(arch::count_flops(arch::builtin("efun-l")));
  const double sec = seconds_since(t0);
  const bool ok = within(e, 850e6, 0.15) && within(l, 1600e6, 0.20) && sec < 1.0;
  report(2, "FLOP accounting (MACs)", ok,
         "efun " + fmt("%.1fM", e / 1e6) + " (850M +-15%), efun-l " + fmt("%.1fM", l / 1e6) + " (1600M +-20%)" +
             fmt(", %.4fs", sec));
}

// ------------------------------------------------------------------- 3

void criterion_compression_table() {
  const double paper[] = {4.23, 3.99, 3.96, 3.93, 3.91};
  const auto& specs = train::default_sweep_specs();
  arch::Model<float> model(arch::efun_base(), 1);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto r = prune_first_block(model, specs[i]);
    const double m = double(r.params_after) / 1e6;
    const bool good = std::abs(m - paper[i]) <= 0.05 && r.params_after == pruned_param_count(model.spec(), specs[i]);
    ok = ok && good;
    detail += specs[i].to_string() + " " + fmt("%.3fM", m) + fmt(" (paper %.2f) ", paper[i]);
  }
  report(3, "compression size table", ok, detail);
}

// ------------------------------------------------------------------- 4

void criterion_codec() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> d(0.0, 255.0);
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (int t = 0; t < 10000; ++t) {
    Block8 b;
    for (auto& v : b) v = d(g);
    const Block8 c = block_dct8(b);
    const Block8 r = block_idct8(c);
    double ep = 0.0, ec = 0.0;
    for (int i = 0; i < kBlockArea; ++i) {
      worst_rt = std::max(worst_rt, std::abs(r[i] - b[i]));
      ep += (b[i] - 128.0) * (b[i] - 128.0);
      ec += c[i] * c[i];
    }
    worst_parseval = std::max(worst_parseval, std::abs(ec - ep) / ep);
  }
  Block8 mid;
  mid.fill(128.0);
  bool zero = true;
  for (double v : block_dct8(mid)) zero = zero && v == 0.0;
  RgbImage img(224, 224);
  for (auto& v : img.data) v = std::uint8_t(g() & 0xff);
  const DctTensor t = preprocess(img, CompressionSpec::full());
  const bool shape = t.grid_h == 28 && t.grid_w == 28 && t.channels == 192;
  const double sec = seconds_since(t0);
  const bool ok = worst_rt < 1e-4 && worst_parseval < 1e-4 && zero && shape && sec < 10.0;
  report(4, "DCT codec properties", ok,
         "round-trip max err " + fmt("%.3g", worst_rt) + ", Parseval max rel err " + fmt("%.3g", worst_parseval) +
             ", constant-128 -> zeros " + (zero ? "yes" : "no") + ", 224x224 -> " + std::to_string(t.grid_h) + "x" +
             std::to_string(t.grid_w) + "x" + std::to_string(t.channels) + fmt(", %.2fs", sec));
}

// ------------------------------------------------------------------- 5

using fun::testing::check_tensor;
using fun::testing::dot;
using fun::testing::GradStats;
using fun::testing::random_tensor;

void merge(GradStats& into, const GradStats& s) {
  into.checked += s.checked;
  if (s.max_rel > into.max_rel) {
    into.max_rel = s.max_rel;
    into.worst = s.worst;
  }
}

GradStats check_module(nn::Module<double>& m, nn::Tensor<double> x, nn::Mode mode, std::uint64_t seed) {
  nn::Rng rng(seed);
  nn::Context ctx{mode, nullptr};
  const auto y = m.forward(x, ctx);
  const auto R = random_tensor(y.dims(), rng);
  nn::StateList<double> state;
  m.collect(state, "");
  for (auto* p : nn::parameters_of(state)) p->zero_grad();
  const auto dx = m.backward(R);
  auto loss = [&] {
    nn::Context c{mode, nullptr};
    return dot(m.forward(x, c), R);
  };
  GradStats st;
  check_tensor(st, "x", x, dx, loss);
  for (auto* p : nn::parameters_of(state)) {
    const auto g = p->grad;
    check_tensor(st, p->name, p->value, g, loss);
  }
  return st;
}

GradStats check_network(const arch::ArchSpec& s, std::uint64_t seed) {
  arch::Model<double> m(s, seed);
  nn::Rng rng(seed + 7);
  auto x = random_tensor({3, std::size_t(s.in_channels()), std::size_t(s.grid_h), std::size_t(s.grid_w)}, rng);
  nn::Context ctx{nn::Mode::train, &rng};
  const auto R = random_tensor(m.forward(x, ctx).dims(), rng);
  for (auto* p : m.parameters()) p->zero_grad();
  const auto dx = m.backward(R);
  auto loss = [&] {
    nn::Context c{nn::Mode::train, &rng};
    return dot(m.forward(x, c), R);
  };
  GradStats st;
  check_tensor(st, "input", x, dx, loss, 16);
  for (auto* p : m.parameters()) {
    const auto g = p->grad;
    check_tensor(st, p->name, p->value, g, loss, 3);
  }
  return st;
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  GradStats all;
  std::string ops;
  auto run = [&](const char* name, const GradStats& s) {
    merge(all, s);
    ops += std::string(ops.empty() ? "" : ",") + name;
  };
  nn::Rng rng(99);
  {
    GradStats s;
    const std::size_t cfg[][5] = {{3, 4, 3, 1, 1}, {4, 6, 3, 2, 2}, {5, 5, 5, 2, 5}, {6, 4, 1, 1, 1}, {3, 5, 1, 2, 1}};
    for (const auto& c : cfg) {
      nn::Conv2d<double> conv(c[0], c[1], c[2], int(c[3]), int(c[4]), c[1] == 6, rng);
      merge(s, check_module(conv, random_tensor({2, c[0], 7, 6}, rng), nn::Mode::train, c[0]));
    }
    run("conv2d", s);
  }
  {
    nn::BatchNorm2d<double> bn(3);
    for (auto& v : bn.gamma().value.data()) v = rng.uniform(0.5, 1.5);
    GradStats s = check_module(bn, random_tensor({3, 3, 4, 4}, rng, 2.0), nn::Mode::train, 1);
    merge(s, check_module(bn, random_tensor({2, 3, 3, 3}, rng), nn::Mode::eval, 2));
    run("batchnorm", s);
  }
  for (auto a : {nn::Activation::swish, nn::Activation::relu, nn::Activation::sigmoid}) {
    nn::ActivationLayer<double> layer(a);
    auto x = random_tensor({2, 3, 4, 4}, rng);
    for (auto& v : x.data())
      if (std::abs(v) < 1e-3) v = 0.5;
    run(nn::to_string(a), check_module(layer, x, nn::Mode::train, 3));
  }
  {
    nn::SqueezeExcite<double> se(6, 2, nn::Activation::swish, rng);
    run("squeeze_excite", check_module(se, random_tensor({2, 6, 3, 4}, rng), nn::Mode::train, 4));
  }
  {
    nn::FullyConnected<double> fc(5, 3, rng);
    run("fc", check_module(fc, random_tensor({2, 5}, rng), nn::Mode::train, 5));
  }
  {
    GradStats s;
    auto x = random_tensor({2, 3, 3, 3}, rng);
    const auto R = random_tensor({2, 3}, rng);
    check_tensor(s, "pool", x, nn::global_avg_pool_backward(x.dims(), R), [&] { return dot(nn::global_avg_pool(x), R); });
    run("global_avg_pool", s);
  }
  {
    GradStats s;
    auto logits = random_tensor({4, 5}, rng, 3.0);
    const std::vector<int> labels = {1, 0, 4, 2};
    nn::Tensor<double> g(logits.dims());
    nn::softmax_cross_entropy(logits, labels, &g);
    check_tensor(s, "xent", logits, g,
                 [&] { return nn::softmax_cross_entropy(logits, labels, static_cast<nn::Tensor<double>*>(nullptr)); },
                 20, 1e-4);
    run("softmax_xent", s);
  }
  {
    GradStats s;
    auto x = random_tensor({4, 2, 2, 2}, rng), r = random_tensor({4, 2, 2, 2}, rng);
    const auto R = random_tensor({4, 2, 2, 2}, rng);
    const std::vector<double> scales = {0.0, 1.25, 1.25, 0.0};
    check_tensor(s, "residual", r, nn::stochastic_depth_backward(R, scales),
                 [&] { return dot(nn::stochastic_depth(x, r, scales), R); }, 32);
    run("stochastic_depth", s);
  }
  {
    GradStats s;
    arch::LearnableFront<double> front(arch::FrontKind::per_plane, rng);
    arch::PlaneBatch<double> b{random_tensor({2, 1, 16, 16}, rng, 50), random_tensor({2, 1, 8, 8}, rng, 50),
                               random_tensor({2, 1, 8, 8}, rng, 50)};
    const auto R = random_tensor(front.forward(b).dims(), rng);
    nn::StateList<double> state;
    front.collect(state, "");
    for (auto* p : nn::parameters_of(state)) p->zero_grad();
    front.backward(R);
    for (auto* p : nn::parameters_of(state)) {
      const auto g = p->grad;
      check_tensor(s, p->name, p->value, g, [&] { return dot(front.forward(b), R); }, 24, 1e-2);
    }
    run("lefun_front", s);
  }
  {
    arch::ArchSpec s;
    s.name = "grad-mb";
    s.grid_h = s.grid_w = 4;
    s.input = CompressionSpec{6, 3, 3};
    s.stages = {arch::mbconv(6, 3, 1, 12, 1), arch::mbconv(6, 3, 1, 12, 1), arch::mbconv(3, 5, 2, 16, 1)};
    s.head_width = 24;
    s.num_classes = 5;
    run("mbconv_network", check_network(s, 1));
    arch::ArchSpec r;
    r.name = "grad-res";
    r.act = nn::Activation::relu;
    r.grid_h = r.grid_w = 4;
    r.input = CompressionSpec{8, 2, 2};
    r.stages = {arch::conv_bn_act(1, 1, 8), arch::bottleneck(1, 16, 2), arch::bottleneck(2, 24, 1)};
    r.head_width = 0;
    r.num_classes = 3;
    run("bottleneck_network", check_network(r, 2));
  }
  const double sec = seconds_since(t0);
  report(5, "gradient correctness (64-bit finite differences)", all.max_rel < 1e-5 && sec < 60.0,
         "max rel err " + fmt("%.3g", all.max_rel) + " over " + std::to_string(all.checked) + " entries [" + ops +
             "]" + fmt(", %.2fs", sec) + (all.max_rel < 1e-5 ? "" : " worst " + all.worst));
}

// ------------------------------------------------------------------- 6

nn::Tensor<float> as_batch(const DctTensor& t) {
  nn::Tensor<float> b({1, std::size_t(t.channels), std::size_t(t.grid_h), std::size_t(t.grid_w)});
  std::copy(t.data.begin(), t.data.end(), b.data().begin());
  return b;
}

void criterion_mask_equivalence() {
  arch::Model<float> model(arch::efun_base(), 3);
  std::mt19937_64 g(6);
  nn::Context ctx{nn::Mode::eval, nullptr};
  int identical = 0;
  for (int t = 0; t < 20; ++t) {
    RgbImage img(224, 224);
    for (auto& v : img.data) v = std::uint8_t(g() & 0xff);
    const CompressionSpec s{int(g() % 65), int(g() % 65), int(g() % 65)};
    const auto a = model.forward(as_batch(mask_channels(preprocess(img, CompressionSpec::full()), s)), ctx);
    const auto b = model.forward(as_batch(zero_pad(preprocess(img, s))), ctx);
    identical += a.vec() == b.vec();
  }
  report(6, "mask/truncate equivalence", identical == 20,
         std::to_string(identical) + "/20 random (image, spec) pairs bit-identical on efun logits");
}

// ------------------------------------------------------------ 7 .. 10

struct ToyRun {
  train::TrainLog log;
  std::unique_ptr<arch::Model<float>> model;
  double seconds = 0.0;
};

struct Toy {
  train::Dataset data;
  train::TensorSplit tr, te;
  arch::ArchSpec spec;
  train::TrainConfig cfg;

  Toy() {
    spec = arch::builtin("micro");
    data = train::synth_freq_dataset(800, 200, 4, 7, spec.grid_h * kBlock);
    spec.num_classes = data.num_classes;
    tr = train::make_split(data.train);
    te = train::make_split(data.test);
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.seed = 1;
  }

  ToyRun run() const {
    ToyRun r;
    const auto t0 = Clock::now();
    r.model = std::make_unique<arch::Model<float>>(spec, cfg.seed);
    r.log = train::train(*r.model, tr, te, cfg);
    r.seconds = seconds_since(t0);
    return r;
  }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = "acceptance_work";
  app.add_option("--work", work, "scratch directory for logs and weights");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  criterion_params();
  criterion_flops();
  criterion_compression_table();
  criterion_codec();
  criterion_gradients();
  criterion_mask_equivalence();

  const Toy toy;
  ToyRun first = toy.run();
  ToyRun second = toy.run();
  std::ofstream(fs::path(work) / "train_log_a.txt") << first.log.text();
  std::ofstream(fs::path(work) / "train_log_b.txt") << second.log.text();
  const bool same_log = first.log.text() == second.log.text();
  const double final_top1 = first.log.epochs.empty() ? 0.0 : first.log.epochs.back().test_top1;
  report(7, "toy-scale learning", final_top1 >= 0.95 && first.log.epochs.size() == 30 && same_log,
         "micro efun (" + std::to_string(first.model->parameter_count()) + " params) final test top-1 " +
             fmt("%.4f", final_top1) + " after 30 epochs (need >= 0.95), rerun log identical " +
             (same_log ? "yes" : "no") + fmt(", %.1fs per run", first.seconds));

  auto& model = *first.model;
  bool sweep_ok = true;
  std::vector<train::MaskReport> rows;
  try {
    rows = train::compression_sweep(model, toy.te, train::default_sweep_specs());
  } catch (const Error& e) {
    sweep_ok = false;
  }
  sweep_ok = sweep_ok && rows.size() == 5;
  std::string sweep_text;
  for (const auto& r : rows) sweep_text += r.spec.to_string() + "=" + fmt("%.3f ", r.accuracy);
  {
    std::ofstream csv(fs::path(work) / "sweep.csv");
    train::write_sweep_csv(csv, rows);
  }
  report(8, "compression trend", sweep_ok && rows.front().accuracy >= rows.back().accuracy,
         sweep_text + "(64/64/64 >= 14/5/5 required)");

  {
    const auto ptr = train::make_plane_split(toy.data.train), pte = train::make_plane_split(toy.data.test);
    train::TrainConfig cfg = toy.cfg;
    cfg.epochs = 0;
    const double static_top1 = train::evaluate(model, toy.te);
    auto dct0 =
        train::run_lefun(train::LefunMode::frozen, model, ptr, pte, cfg, arch::FrontKind::shared, train::FrontInit::dct);
    cfg.epochs = 10;
    auto frozen = train::run_lefun(train::LefunMode::frozen, model, ptr, pte, cfg);
    auto e2e = train::run_lefun(train::LefunMode::end_to_end, model, ptr, pte, cfg);
    save_weights(fs::path(work) / "lefun_e2e.weights", *e2e.model, cfg.seed);
    const bool ok = e2e.top1 >= frozen.top1 && dct0.top1 == static_top1;
    report(9, "LeFUN ordering", ok,
           "static " + fmt("%.4f", static_top1) + ", DCT-init 0 epochs " + fmt("%.4f", dct0.top1) + ", frozen " +
               fmt("%.4f", frozen.top1) + ", e2e " + fmt("%.4f", e2e.top1) + " (10 epochs each, random front)");
  }

  {
    const fs::path a = fs::path(work) / "micro_a.weights", b = fs::path(work) / "micro_b.weights";
    save_weights(a, model, toy.cfg.seed);
    auto loaded = load_weights(a);
    save_weights(b, *loaded.model, loaded.header.seed);
    const bool round_trip = file_bytes(a) == file_bytes(b) && !file_bytes(a).empty();
    const fs::path c = fs::path(work) / "micro_rerun.weights";
    save_weights(c, *second.model, toy.cfg.seed);
    const bool same_weights = file_bytes(a) == file_bytes(c);
    report(10, "determinism and serialization", same_log && round_trip && same_weights,
           std::string("identical-seed logs equal ") + (same_log ? "yes" : "no") + ", trained weights equal " +
               (same_weights ? "yes" : "no") + ", save/load/save byte-identical " + (round_trip ? "yes" : "no") +
               " (" + std::to_string(fs::file_size(a)) + " bytes)");
  }

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
