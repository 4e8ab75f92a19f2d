// fun: command-line front end for the frequency-domain network toolkit.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fun/arch/accounting.hpp"
#include "fun/fdt_format.hpp"
#include "fun/train/lefun.hpp"
#include "fun/train/sweep.hpp"
#include "fun/weights.hpp"

namespace fs = std::filesystem;
using namespace fun;

namespace {

arch::ArchSpec resolve_arch(const std::string& name_or_path) {
  if (fs::is_regular_file(name_or_path)) return arch::load_arch(name_or_path);
  return arch::builtin(name_or_path);
}

struct DataOptions {
  std::string source;
  int synth_train = 800;
  int synth_test = 200;
  int classes = 4;
  int image_size = 0;  // 0: match the architecture's grid
  std::uint64_t data_seed = 7;
  std::string cache_dir;

  void add_to(CLI::App* cmd, bool required = true) {
    auto* o = cmd->add_option("--data", source, "dataset directory, or 'synth' for the synthetic frequency task");
    if (required) o->required();
    cmd->add_option("--synth-train", synth_train, "synthetic training images")->capture_default_str();
    cmd->add_option("--synth-test", synth_test, "synthetic test images")->capture_default_str();
    cmd->add_option("--classes", classes, "synthetic class count (1..8)")->capture_default_str();
    cmd->add_option("--image-size", image_size, "synthetic image side in pixels (default: 8 x grid)");
    cmd->add_option("--data-seed", data_seed, "synthetic dataset seed")->capture_default_str();
    cmd->add_option("--cache", cache_dir, "directory for cached FDT1 tensors");
  }

  train::Dataset load(int grid) const {
    if (source == "synth") {
      const int size = image_size > 0 ? image_size : grid * kBlock;
      return train::synth_freq_dataset(synth_train, synth_test, classes, data_seed, size);
    }
    return train::load_folder_dataset(source);
  }
};

void print_energy(const std::string& label, const DctTensor& t) {
  const auto e = plane_energy(t);
  std::printf("%s: %dx%dx%d (keep %s) energy Y %.6g Cb %.6g Cr %.6g\n", label.c_str(), t.grid_h, t.grid_w, t.channels,
              t.spec.to_string().c_str(), e[0], e[1], e[2]);
}

int cmd_preprocess(const std::string& input, const std::string& keep, const std::string& out) {
  const CompressionSpec spec = CompressionSpec::parse(keep);
  if (fs::is_directory(input)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorKind::io, "no .ppm files under " + input);
    for (const auto& f : files) {
      const fs::path rel = fs::relative(f, input);
      fs::path dst = fs::path(out) / rel;
      dst.replace_extension(".fdt");
      fs::create_directories(dst.parent_path());
      const DctTensor t = preprocess(read_ppm(f), spec);
      save_fdt1(dst, t);
      print_energy(rel.string(), t);
    }
    return 0;
  }
  const DctTensor t = preprocess(read_ppm(input), spec);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_fdt1(out, t);
  print_energy(input, t);
  return 0;
}

int cmd_inspect(const std::string& name, bool json) {
  const arch::ArchSpec s = resolve_arch(name);
  const auto layers = arch::summarize(s);
  const auto total = arch::total_cost(s);
  if (json) {
    std::printf("{\"name\": \"%s\", \"input\": [%d, %d, %d], \"depth\": %zu, \"params\": %lld, \"macs\": %lld,\n",
                s.name.c_str(), s.grid_h, s.grid_w, s.in_channels(), layers.size(), (long long)total.params,
                (long long)total.macs);
    std::printf(" \"blocks\": [\n");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      std::printf(
          "  {\"op\": \"%s\", \"kernel\": %d, \"stride\": %d, \"in\": [%d, %d, %d], \"out\": [%d, %d, %d], "
          "\"skip\": %s, \"params\": %lld, \"macs\": %lld}%s\n",
          l.op.c_str(), l.kernel, l.stride, l.in_h, l.in_w, l.in_channels, l.out_h, l.out_w, l.out_channels,
          l.skip ? "true" : "false", (long long)l.cost.params, (long long)l.cost.macs,
          i + 1 < layers.size() ? "," : "");
    }
    std::printf(" ]}\n");
    return 0;
  }
  std::printf("%s  input %dx%dx%d  activation %s\n", s.name.c_str(), s.grid_h, s.grid_w, s.in_channels(),
              nn::to_string(s.act));
  std::printf("%-4s %-13s %2s %2s %-14s %-14s %4s %10s %14s\n", "#", "op", "k", "s", "in", "out", "skip", "params",
              "MACs");
  for (const auto& l : layers) {
    char in[32], out[32];
    std::snprintf(in, sizeof in, "%dx%dx%d", l.in_h, l.in_w, l.in_channels);
    std::snprintf(out, sizeof out, "%dx%dx%d", l.out_h, l.out_w, l.out_channels);
    std::printf("%-4d %-13s %2d %2d %-14s %-14s %4s %10lld %14lld\n", l.index, l.op.c_str(), l.kernel, l.stride, in,
                out, l.skip ? "yes" : "no", (long long)l.cost.params, (long long)l.cost.macs);
  }
  std::printf("head conv1x1 %d + pool + fc %d\n", s.head_width, s.num_classes);
  std::printf("depth %zu\nparams %lld (%.2fM)\nMACs %lld (%.1fM, multiply-accumulate convention)\n", layers.size(),
              (long long)total.params, double(total.params) / 1e6, (long long)total.macs, double(total.macs) / 1e6);
  return 0;
}

struct TrainOptions {
  std::string arch = "micro";
  DataOptions data;
  int epochs = 30;
  int batch = 32;
  double lr0 = 0.048;
  double sd = -1.0;
  std::uint64_t seed = 1;
  std::string optimizer = "rmsprop";
  bool resfun_preset = false;
  bool hflip = false;
  std::string save;
  std::string log;
};

train::TrainConfig make_config(const TrainOptions& o, const arch::ArchSpec& spec) {
  train::TrainConfig cfg = o.resfun_preset ? train::TrainConfig::resfun_preset() : train::TrainConfig{};
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  cfg.hflip = o.hflip;
  cfg.cache_dir = o.data.cache_dir;
  if (!o.resfun_preset) {
    cfg.exponential.lr0 = o.lr0;
    if (o.optimizer == "sgd") cfg.optimizer.kind = nn::OptimizerKind::sgd_momentum;
    else if (o.optimizer != "rmsprop") fail(ErrorKind::usage, "unknown optimizer '" + o.optimizer + "'");
  }
  // The larger scaled model uses a stronger drop rate.
  if (o.sd >= 0.0) cfg.stochastic_depth_max = o.sd;
  else if (!o.resfun_preset && spec.name == "efun-l") cfg.stochastic_depth_max = 0.3;
  return cfg;
}

int cmd_train(const TrainOptions& o) {
  arch::ArchSpec spec = resolve_arch(o.arch);
  const train::Dataset d = o.data.load(spec.grid_h);
  spec.num_classes = d.num_classes;
  const auto cfg = make_config(o, spec);
  const auto tr = train::make_split(d.train, cfg.cache_dir);
  const auto te = train::make_split(d.test, cfg.cache_dir);
  arch::Model<float> model(spec, o.seed);
  std::ofstream logfile;
  if (!o.log.empty()) {
    logfile.open(o.log);
    if (!logfile) fail(ErrorKind::io, "cannot write " + o.log);
  }
  struct Tee : std::streambuf {
    std::streambuf *a, *b;
    Tee(std::streambuf* x, std::streambuf* y) : a(x), b(y) {}
    int overflow(int c) override {
      if (c == EOF) return !EOF;
      if (a) a->sputc(char(c));
      if (b) b->sputc(char(c));
      return c;
    }
    int sync() override {
      if (a) a->pubsync();
      if (b) b->pubsync();
      return 0;
    }
  } tee(std::cout.rdbuf(), logfile.is_open() ? logfile.rdbuf() : nullptr);
  std::ostream out(&tee);
  const auto log = train::train(model, tr, te, cfg, &out);
  if (!o.save.empty()) save_weights(o.save, model, o.seed);
  std::printf("final test_top1 %.4f\n", log.epochs.empty() ? train::evaluate(model, te) : log.epochs.back().test_top1);
  return 0;
}

train::TensorSplit load_eval_split(const DataOptions& data, const arch::ArchSpec& spec) {
  const train::Dataset d = data.load(spec.grid_h);
  require(d.num_classes <= spec.num_classes, ErrorKind::config,
          "dataset has " + std::to_string(d.num_classes) + " classes, model predicts " +
              std::to_string(spec.num_classes));
  return train::make_split(d.test, data.cache_dir);
}

int cmd_eval(const std::string& weights, const DataOptions& data, const std::string& keep) {
  auto w = load_weights(weights);
  require(!w.lefun, ErrorKind::config, "eval expects DCT-input weights; use 'lefun' for learnable-front models");
  const CompressionSpec spec = keep.empty() ? w.header.compression : CompressionSpec::parse(keep);
  require(w.model->spec().input.is_full() || spec == w.model->spec().input, ErrorKind::config,
          "model consumes " + w.model->spec().input.to_string() + " channels; cannot evaluate with keep " +
              spec.to_string());
  const auto te = load_eval_split(data, w.model->spec());
  std::printf("top1 %.4f\n", train::evaluate(*w.model, te, spec));
  return 0;
}

int cmd_sweep(const std::string& weights, const DataOptions& data, const std::string& specs) {
  auto w = load_weights(weights);
  require(!w.lefun, ErrorKind::config, "sweep expects DCT-input weights");
  const auto list = specs.empty() ? train::default_sweep_specs() : train::parse_spec_list(specs);
  const auto te = load_eval_split(data, w.model->spec());
  train::write_sweep_csv(std::cout, train::compression_sweep(*w.model, te, list));
  return 0;
}

int cmd_export_filters(const std::string& weights, bool static_dct, const std::string& out) {
  require(static_dct != !weights.empty(), ErrorKind::usage, "give exactly one of --weights or --static-dct");
  std::vector<nn::Tensor<double>> banks;
  if (static_dct) {
    banks.push_back(train::static_dct_bank());
  } else {
    auto w = load_weights(weights);
    require(bool(w.lefun), ErrorKind::config, "weights file has no learnable front layer");
    for (std::size_t b = 0; b < w.lefun->front().banks(); ++b)
      banks.push_back(nn::Tensor<double>::cast_from(w.lefun->front().weight(b).value));
  }
  fs::create_directories(out);
  for (std::size_t b = 0; b < banks.size(); ++b) {
    const auto imgs = train::filter_images(banks[b]);
    for (std::size_t k = 0; k < imgs.size(); ++k) {
      char name[64];
      if (banks.size() == 1) std::snprintf(name, sizeof name, "filter_%02zu.pgm", k);
      else std::snprintf(name, sizeof name, "bank%zu_filter_%02zu.pgm", b, k);
      write_pgm(fs::path(out) / name, imgs[k]);
    }
  }
  std::printf("wrote %zu filters to %s\n", banks.size() * std::size_t(kBlockArea), out.c_str());
  return 0;
}

int cmd_bench(const std::string& name, int batch, int iters, int warmup) {
  require(batch > 0 && iters > 0 && warmup >= 0, ErrorKind::usage, "batch and iters must be positive");
  const arch::ArchSpec s = resolve_arch(name);
  arch::Model<float> model(s, 1);
  nn::Tensor<float> x({std::size_t(batch), std::size_t(s.in_channels()), std::size_t(s.grid_h), std::size_t(s.grid_w)});
  nn::Rng rng(1);
  for (auto& v : x.data()) v = float(rng.normal());
  nn::Context ctx{nn::Mode::eval, nullptr};
  for (int i = 0; i < warmup; ++i) model.forward(x, ctx);
  std::vector<double> rates;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forward(x, ctx);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rates.push_back(double(batch) / sec);
  }
  std::sort(rates.begin(), rates.end());
  const double median =
      rates.size() % 2 ? rates[rates.size() / 2] : 0.5 * (rates[rates.size() / 2 - 1] + rates[rates.size() / 2]);
  std::printf("arch %s depth %zu batch %d iters %d images_per_sec %.2f (median, local CPU)\n", s.name.c_str(),
              model.depth(), batch, iters, median);
  return 0;
}

struct LefunOptions {
  std::string weights;
  DataOptions data;
  std::string mode = "both";
  std::string front = "shared";
  std::string init = "random";
  int epochs = 10;
  int batch = 32;
  double lr0 = 0.048;
  std::uint64_t seed = 1;
  std::string save_prefix;
};

int cmd_lefun(const LefunOptions& o) {
  auto w = load_weights(o.weights);
  require(!w.lefun, ErrorKind::config, "lefun needs a static DCT-input base model");
  arch::Model<float>& base = *w.model;
  const auto d = o.data.load(base.spec().grid_h);
  require(d.num_classes <= base.spec().num_classes, ErrorKind::config, "dataset has more classes than the model");
  const auto kind = arch::parse_front_kind(o.front);
  require(kind != arch::FrontKind::none, ErrorKind::usage, "--front must be shared or per-plane");
  require(o.init == "random" || o.init == "dct", ErrorKind::usage, "--init must be random or dct");
  require(o.mode == "frozen" || o.mode == "e2e" || o.mode == "both", ErrorKind::usage,
          "--mode must be frozen, e2e or both");
  const auto init = o.init == "dct" ? train::FrontInit::dct : train::FrontInit::random;
  train::TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  cfg.exponential.lr0 = o.lr0;
  const auto te_static = train::make_split(d.test, o.data.cache_dir);
  const auto tr = train::make_plane_split(d.train);
  const auto te = train::make_plane_split(d.test);
  train::LefunReport report;
  report.static_top1 = train::evaluate(base, te_static);
  auto run = [&](train::LefunMode m) {
    std::printf("# lefun %s\n", train::to_string(m));
    auto r = train::run_lefun(m, base, tr, te, cfg, kind, init, &std::cout);
    if (!o.save_prefix.empty()) save_weights(o.save_prefix + "_" + train::to_string(m) + ".weights", *r.model, o.seed);
    return r.top1;
  };
  if (o.mode != "e2e") report.frozen_top1 = run(train::LefunMode::frozen);
  if (o.mode != "frozen") report.e2e_top1 = run(train::LefunMode::end_to_end);
  std::printf("%s", report.text().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain image classification toolkit"};
  app.require_subcommand(1);

  std::string input, keep = "64,64,64", out;
  auto* pre = app.add_subcommand("preprocess", "RGB PPM image(s) -> FDT1 DCT tensors");
  pre->add_option("input", input, "PPM image or directory of images")->required();
  pre->add_option("--keep", keep, "keep-counts Y,CB,CR")->capture_default_str();
  pre->add_option("--out", out, "output file (or directory for directory input)")->required();

  std::string arch_name;
  bool json = false;
  auto* ins = app.add_subcommand("inspect", "stage table, parameter count and MACs");
  ins->add_option("--arch", arch_name, "built-in name or architecture file")->required();
  ins->add_flag("--json", json, "machine-readable output");

  TrainOptions to;
  auto* trn = app.add_subcommand("train", "train a DCT-input network");
  trn->add_option("--arch", to.arch, "built-in name or architecture file")->capture_default_str();
  to.data.add_to(trn);
  trn->add_option("--epochs", to.epochs)->capture_default_str();
  trn->add_option("--batch", to.batch)->capture_default_str();
  trn->add_option("--lr0", to.lr0, "initial learning rate")->capture_default_str();
  trn->add_option("--optimizer", to.optimizer, "rmsprop or sgd")->capture_default_str();
  trn->add_flag("--resfun-preset", to.resfun_preset, "SGD with the 0.1/0.01/0.001 step schedule");
  trn->add_option("--stochastic-depth", to.sd, "maximum drop rate (default 0.2, 0.3 for efun-l)");
  trn->add_option("--seed", to.seed)->capture_default_str();
  trn->add_flag("--hflip", to.hflip, "random horizontal flips");
  trn->add_option("--save", to.save, "weights output path");
  trn->add_option("--log", to.log, "also write the training log here");

  std::string weights, specs;
  DataOptions eval_data;
  auto* ev = app.add_subcommand("eval", "top-1 accuracy with optional channel masking");
  ev->add_option("--weights", weights)->required();
  eval_data.add_to(ev);
  std::string eval_keep;
  ev->add_option("--keep", eval_keep, "keep-counts Y,CB,CR applied as a mask");

  auto* sw = app.add_subcommand("sweep", "accuracy across compression specs (CSV)");
  sw->add_option("--weights", weights)->required();
  DataOptions sweep_data;
  sweep_data.add_to(sw);
  sw->add_option("--specs", specs, "specs separated by ';' (default: the five reference specs)");

  bool static_dct = false;
  auto* ex = app.add_subcommand("export-filters", "write the 64 8x8 filters as PGM images");
  ex->add_option("--weights", weights, "weights with a learnable front");
  ex->add_flag("--static-dct", static_dct, "export the fixed DCT basis");
  ex->add_option("--out", out)->required();

  int batch = 1, iters = 20, warmup = 2;
  auto* bn = app.add_subcommand("bench", "local forward-pass throughput");
  bn->add_option("--arch", arch_name)->required();
  bn->add_option("--batch", batch)->capture_default_str();
  bn->add_option("--iters", iters)->capture_default_str();
  bn->add_option("--warmup", warmup)->capture_default_str();

  LefunOptions lo;
  auto* lf = app.add_subcommand("lefun", "replace the DCT with a learnable front and train it");
  lf->add_option("--weights", lo.weights, "trained static model")->required();
  lo.data.add_to(lf);
  lf->add_option("--mode", lo.mode, "frozen, e2e or both")->capture_default_str();
  lf->add_option("--front", lo.front, "shared or per-plane")->capture_default_str();
  lf->add_option("--init", lo.init, "random or dct")->capture_default_str();
  lf->add_option("--epochs", lo.epochs)->capture_default_str();
  lf->add_option("--batch", lo.batch)->capture_default_str();
  lf->add_option("--lr0", lo.lr0)->capture_default_str();
  lf->add_option("--seed", lo.seed)->capture_default_str();
  lf->add_option("--save-prefix", lo.save_prefix, "write <prefix>_<mode>.weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*pre) return cmd_preprocess(input, keep, out);
    if (*ins) return cmd_inspect(arch_name, json);
    if (*trn) return cmd_train(to);
    if (*ev) return cmd_eval(weights, eval_data, eval_keep);
    if (*sw) return cmd_sweep(weights, sweep_data, specs);
    if (*ex) return cmd_export_filters(weights, static_dct, out);
    if (*bn) return cmd_bench(arch_name, batch, iters, warmup);
    if (*lf) return cmd_lefun(lo);
  } catch (const Error& e) {
    std::fprintf(stderr, "fun: %s: %s\n", to_string(e.kind()), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fun: %s\n", e.what());
    return 1;
  }
  return 0;
}
