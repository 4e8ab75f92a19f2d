#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "fun/train/lefun.hpp"
#include "fun/train/sweep.hpp"
#include "fun/weights.hpp"

using namespace fun;
using namespace fun::train;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fun_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

arch::ArchSpec micro(int classes) {
  arch::ArchSpec s = arch::builtin("micro");
  s.num_classes = classes;
  return s;
}

TrainConfig short_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = 3;
  return c;
}

std::string bytes_of(arch::Model<float>& m, std::uint64_t seed) {
  std::ostringstream os;
  write_weights(os, m, seed);
  return os.str();
}

}  // namespace

TEST(Synthetic, DeterministicAndBalanced) {
  const auto a = synth_freq_dataset(40, 12, 4, 9, 32);
  const auto b = synth_freq_dataset(40, 12, 4, 9, 32);
  ASSERT_EQ(a.train.size(), 40u);
  std::map<int, int> hist;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].image.data, b.train[i].image.data);
    EXPECT_EQ(a.train[i].label, b.train[i].label);
    ++hist[a.train[i].label];
  }
  for (const auto& [label, n] : hist) EXPECT_NEAR(n, 10, 1) << label;
  EXPECT_NE(a.train[0].image.data, a.test[0].image.data);
  EXPECT_NE(synth_freq_dataset(4, 0, 4, 10, 32).train[0].image.data, a.train[0].image.data);
}

TEST(Synthetic, EnergyFollowsFrequencyBand) {
  const auto d = synth_freq_dataset(40, 0, 4, 1, 32);
  double centroid[4] = {}, low_share[4] = {};
  int count[4] = {};
  for (const auto& s : d.train) {
    const DctTensor t = preprocess(s.image, CompressionSpec::full());
    double low = 0.0, total = 0.0, weighted = 0.0;
    for (int k = 1; k < 64; ++k) {
      double e = 0.0;
      for (int r = 0; r < t.grid_h; ++r)
        for (int c = 0; c < t.grid_w; ++c) e += double(t.at(k, r, c)) * t.at(k, r, c);
      total += e;
      weighted += e * k;
      if (k < 10) low += e;
    }
    centroid[s.label] += weighted / total;
    low_share[s.label] += low / total;
    ++count[s.label];
  }
  // Class 0 sits in the first anti-diagonals; higher classes move outward.
  EXPECT_GT(low_share[0] / count[0], 0.5);
  for (int k = 1; k < 4; ++k) EXPECT_GT(centroid[k] / count[k], centroid[k - 1] / count[k - 1]) << k;
}

TEST(FolderDataset, TwoClassesAndOrder) {
  const fs::path root = scratch_dir("folder");
  const auto synth = synth_freq_dataset(6, 0, 2, 4, 16);
  for (const char* cls : {"a", "b"}) fs::create_directories(root / cls);
  for (std::size_t i = 0; i < 6; ++i)
    write_ppm(root / (synth.train[i].label == 0 ? "a" : "b") / ("img" + std::to_string(i) + ".ppm"),
              synth.train[i].image);
  const Dataset d1 = load_folder_dataset(root), d2 = load_folder_dataset(root);
  EXPECT_EQ(d1.num_classes, 2);
  ASSERT_EQ(d1.train.size(), 6u);
  EXPECT_EQ(d1.class_names, std::vector<std::string>({"a", "b"}));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(d1.train[i].image.data, d2.train[i].image.data);
    EXPECT_EQ(d1.train[i].label, i < 3 ? 0 : 1);
  }
}

TEST(FolderDataset, Errors) {
  const fs::path root = scratch_dir("empty");
  try {
    load_folder_dataset(root);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dataset);
  }
  fs::create_directories(root / "x");
  std::ofstream(root / "x" / "bad.ppm") << "P6\n3 3\n255\n";
  try {
    load_folder_dataset(root);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad.ppm"), std::string::npos);
  }
}

TEST(Cache, WritesAndReusesTensors) {
  const fs::path dir = scratch_dir("cache");
  const auto d = synth_freq_dataset(3, 0, 2, 5, 16);
  const auto a = preprocess_all(d.train, CompressionSpec::full(), dir);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 3u);
  const auto b = preprocess_all(d.train, CompressionSpec::full(), dir);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Training, ZeroEpochsLeavesModel) {
  const auto d = synth_freq_dataset(16, 8, 4, 1, 32);
  const auto tr = make_split(d.train), te = make_split(d.test);
  arch::Model<float> m(micro(4), 2), fresh(micro(4), 2);
  const auto log = train::train(m, tr, te, short_config(0));
  EXPECT_TRUE(log.epochs.empty());
  EXPECT_EQ(bytes_of(m, 2), bytes_of(fresh, 2));
}

TEST(Training, DeterministicLogsAndWeights) {
  const auto d = synth_freq_dataset(64, 16, 4, 2, 32);
  const auto tr = make_split(d.train), te = make_split(d.test);
  std::string logs[2], weights[2];
  for (int run = 0; run < 2; ++run) {
    arch::Model<float> m(micro(4), 5);
    logs[run] = train::train(m, tr, te, short_config(2)).text();
    weights[run] = bytes_of(m, 5);
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(weights[0], weights[1]);
  EXPECT_NE(logs[0].find("epoch 1 lr 0.048 "), std::string::npos) << logs[0];
}

TEST(Training, DivergenceIsReported) {
  const auto d = synth_freq_dataset(96, 0, 4, 2, 32);
  const auto tr = make_split(d.train);
  arch::Model<float> m(micro(4), 5);
  TrainConfig c = short_config(2);
  c.exponential.lr0 = 1e30;
  try {
    train::train(m, tr, TensorSplit{}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
  }
}

TEST(Evaluate, ConstantLogitsGiveClassFrequency) {
  const auto d = synth_freq_dataset(0, 30, 3, 2, 32);
  const auto te = make_split(d.test);
  arch::Model<float> m(micro(3), 1);
  auto state = m.state();
  for (auto& e : state) {
    if (e.name == "fc.weight") e.tensor->fill(0.0f);
    if (e.name == "fc.bias") {
      e.tensor->fill(0.0f);
      (*e.tensor)[2] = 1.0f;
    }
  }
  EXPECT_DOUBLE_EQ(evaluate(m, te), 10.0 / 30.0);
}

TEST(Evaluate, FullMaskAndSweepMatchPlainEvaluation) {
  const auto d = synth_freq_dataset(0, 40, 4, 6, 32);
  const auto te = make_split(d.test);
  arch::Model<float> m(micro(4), 9);
  const double plain = evaluate(m, te);
  EXPECT_EQ(evaluate(m, te, CompressionSpec::full()), plain);
  const auto rows = compression_sweep(m, te, {CompressionSpec::full()});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].accuracy, plain);
  const auto all = compression_sweep(m, te, default_sweep_specs());
  std::vector<int> channels;
  for (const auto& r : all) channels.push_back(r.channels_active);
  EXPECT_EQ(channels, std::vector<int>({192, 88, 64, 48, 24}));
  std::ostringstream csv;
  write_sweep_csv(csv, all);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "keep_y,keep_cb,keep_cr,channels,top1,params");
}

TEST(SpecList, Parsing) {
  const auto v = parse_spec_list("64/64/64; 14,5,5");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1], (CompressionSpec{14, 5, 5}));
  EXPECT_THROW(parse_spec_list(" ; "), Error);
}

TEST(Weights, RoundTripIsByteIdentical) {
  arch::Model<float> m(micro(4), 11);
  arch::InputNorm n;
  for (int c = 0; c < 192; ++c) {
    n.mean.push_back(0.1f * float(c) - 3.3f);
    n.stddev.push_back(1.0f / float(c + 3));
  }
  m.set_norm(n);
  const std::string first = bytes_of(m, 11);
  std::istringstream in(first);
  auto loaded = read_weights(in);
  ASSERT_TRUE(loaded.model);
  EXPECT_EQ(bytes_of(*loaded.model, loaded.header.seed), first);
  EXPECT_EQ(loaded.model->norm().mean, n.mean);
}

TEST(Weights, LearnableFrontRoundTrip) {
  arch::LeFunModel<float> m(micro(4), arch::FrontKind::per_plane, 4);
  std::ostringstream a;
  write_weights(a, m, 4);
  std::istringstream in(a.str());
  auto loaded = read_weights(in);
  ASSERT_TRUE(loaded.lefun);
  EXPECT_EQ(loaded.lefun->front().kind(), arch::FrontKind::per_plane);
  std::ostringstream b;
  write_weights(b, *loaded.lefun, 4);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Weights, RejectsDamagedFiles) {
  arch::Model<float> m(micro(4), 1);
  const std::string good = bytes_of(m, 1);
  std::istringstream truncated(good.substr(0, good.size() - 10));
  EXPECT_THROW(read_weights(truncated), Error);
  std::istringstream trailing(good + "x");
  EXPECT_THROW(read_weights(trailing), Error);
  std::string wrong = good;
  wrong.replace(0, 13, "fun-weights 9");
  std::istringstream version(wrong);
  EXPECT_THROW(read_weights(version), Error);
}

TEST(LearnableFront, DctInitReproducesPreprocess) {
  const auto d = synth_freq_dataset(3, 0, 4, 8, 32);
  std::mt19937_64 g(1);
  RgbImage color(32, 48);
  for (auto& v : color.data) v = std::uint8_t(g() & 0xff);
  std::vector<RgbImage> images = {d.train[0].image, d.train[1].image};
  for (const auto& img : {color}) images.push_back(img);
  for (const auto& img : images) {
    nn::Rng rng(0);
    arch::LearnableFront<double> front(arch::FrontKind::shared, rng);
    front.init_dct_basis();
    const PlaneSet ps = rgb_to_ycbcr(img);
    const auto out = front.forward(arch::make_plane_batch<double>({&ps}));
    const DctTensor ref = preprocess(img, CompressionSpec::full());
    ASSERT_EQ(out.size(), ref.data.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(out[i] - double(ref.data[i])));
    EXPECT_LT(worst, 1e-4);
  }
}

TEST(Lefun, DctInitZeroEpochsMatchesStatic) {
  const auto d = synth_freq_dataset(64, 48, 4, 3, 32);
  const auto tr = make_split(d.train), te = make_split(d.test);
  arch::Model<float> base(micro(4), 2);
  train::train(base, tr, te, short_config(2));
  const auto ptr = make_plane_split(d.train), pte = make_plane_split(d.test);
  TrainConfig c = short_config(0);
  auto r = run_lefun(LefunMode::frozen, base, ptr, pte, c, arch::FrontKind::shared, FrontInit::dct);
  EXPECT_EQ(r.top1, evaluate(base, te));
  EXPECT_TRUE(r.log.epochs.empty());
}

TEST(Lefun, FrozenModeKeepsBodyBitIdentical) {
  const auto d = synth_freq_dataset(32, 16, 4, 3, 32);
  arch::Model<float> base(micro(4), 2);
  const std::string before = bytes_of(base, 2);
  const auto ptr = make_plane_split(d.train), pte = make_plane_split(d.test);
  auto r = run_lefun(LefunMode::frozen, base, ptr, pte, short_config(1));
  EXPECT_EQ(bytes_of(r.model->body(), 2), before);
  EXPECT_EQ(r.log.epochs.size(), 1u);
  // The front did move.
  nn::Rng rng(2 ^ 0x9e3779b97f4a7c15ULL);
  arch::LearnableFront<float> init(arch::FrontKind::shared, rng);
  EXPECT_NE(init.weight(0).value.vec(), r.model->front().weight(0).value.vec());
}

TEST(Filters, StaticDctImages) {
  const auto imgs = filter_images(static_dct_bank());
  ASSERT_EQ(imgs.size(), 64u);
  for (auto v : imgs[0].data) EXPECT_EQ(v, 128);
  // Zigzag index 1 is (0,1): varies along columns only, falling from left to right.
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) EXPECT_EQ(imgs[1].data[r * 8 + c], imgs[1].data[c]);
  EXPECT_EQ(imgs[1].data[0], 255);
  EXPECT_EQ(imgs[1].data[7], 0);
  for (int c = 1; c < 8; ++c) EXPECT_LT(imgs[1].data[c], imgs[1].data[c - 1]);
}
