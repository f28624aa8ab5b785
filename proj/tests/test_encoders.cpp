#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "revrir/contrastive.hpp"
#include "revrir/encoders.hpp"
#include "revrir/error.hpp"
#include "revrir/pretrain.hpp"

using namespace revrir;
using namespace revrir::joint;

namespace {

std::vector<std::vector<double>> random_features(std::size_t n, std::size_t dim, std::uint64_t seed,
                                                 double offset = 0.0) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& row : out) {
    for (double& v : row) v = offset + 20.0 * rng.normal();
  }
  return out;
}

std::vector<const std::vector<double>*> pointers(const std::vector<std::vector<double>>& rows) {
  std::vector<const std::vector<double>*> out;
  for (const auto& r : rows) out.push_back(&r);
  return out;
}

std::vector<nn::Tensor> tensors_of(const std::vector<nn::NamedTensor>& named) {
  std::vector<nn::Tensor> out;
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

/// Class-dependent features: a class-specific mean plus noise.
PairedFeatures toy_pairs(std::size_t per_class, std::size_t classes, std::size_t speech_dim,
                         std::size_t rir_dim, std::uint64_t seed) {
  Rng rng(seed);
  PairedFeatures p;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      std::vector<double> s(speech_dim), r(rir_dim);
      for (std::size_t i = 0; i < speech_dim; ++i) s[i] = 10.0 * std::sin(0.7 * (c + 1) * i) + 2.0 * rng.normal();
      for (std::size_t i = 0; i < rir_dim; ++i) r[i] = 10.0 * std::cos(0.5 * (c + 1) * i) + 2.0 * rng.normal();
      p.speech.push_back(std::move(s));
      p.rir.push_back(std::move(r));
      p.labels.push_back(static_cast<int>(c));
    }
  }
  return p;
}

}  // namespace

TEST(Encoders, EmbeddingsAreUnitNorm) {
  Rng rng(1);
  RirEncoder rir({33, {16, 8}}, rng);
  const auto feats = random_features(5, 33, 2);
  const auto p = pointers(feats);
  for (bool training : {true, false}) {
    rir.set_training(training);
    nn::Tensor e = rir.embed(p);
    ASSERT_EQ(e.dim(0), 5u);
    ASSERT_EQ(e.dim(1), 8u);
    for (std::size_t i = 0; i < 5; ++i) {
      double n = 0.0;
      for (std::size_t k = 0; k < 8; ++k) n += e.values()[i * 8 + k] * e.values()[i * 8 + k];
      EXPECT_NEAR(n, 1.0, 1e-12);
    }
  }
}

TEST(Encoders, SpeechEncoderPoolsFrames) {
  Rng rng(2);
  SpeechEncoder speech({9, 6, {5, 4}}, rng);
  speech.set_training(false);
  const auto feats = random_features(3, 9 * 7, 3);  // 7 frames of 9 bins
  nn::Tensor e = speech.embed(pointers(feats));
  EXPECT_EQ(e.dim(0), 3u);
  EXPECT_EQ(e.dim(1), 4u);
  const auto ragged = random_features(1, 9 * 7 + 2, 4);
  EXPECT_THROW(speech.embed(pointers(ragged)), Error);
}

TEST(Encoders, GradientCheckRirEncoder) {
  Rng rng(3);
  RirEncoder rir({9, {6, 4}}, rng);
  const auto feats = random_features(6, 9, 4);
  const auto p = pointers(feats);
  const std::vector<double> w = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.6, -0.1, 0.2, 0.15, -0.3, 0.05,
                                 0.35, -0.25, 0.45, -0.05, 0.1, 0.2, -0.6, 0.3, 0.4, -0.35, 0.15, 0.5};
  const auto report =
      gradcheck::check(tensors_of(rir.parameters()), [&] { return nn::dot_const(rir.embed(p), w); });
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST(Encoders, GradientCheckSpeechEncoder) {
  Rng rng(5);
  SpeechEncoder speech({5, 4, {4, 3}}, rng);
  const auto feats = random_features(5, 5 * 3, 6);
  const auto p = pointers(feats);
  const std::vector<double> w = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.6, -0.1,
                                 0.2, 0.15, -0.3, 0.05, 0.35, -0.25, 0.45};
  const auto report =
      gradcheck::check(tensors_of(speech.parameters()), [&] { return nn::dot_const(speech.embed(p), w); });
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST(Encoders, InitialLossNearLogBAtUnitTemperature) {
  const std::size_t b = 32;
  DualEncoder model({17, 16, {16, 8}}, {65, {32, 8}}, 1.0, 7);
  const auto speech = random_features(b, 17 * 4, 8, -40.0);
  const auto rir = random_features(b, 65, 9, -30.0);
  std::vector<int> labels(b);
  for (std::size_t i = 0; i < b; ++i) labels[i] = static_cast<int>(i);
  const auto e1 = model.speech.embed(pointers(speech));
  const auto e2 = model.rir.embed(pointers(rir));
  const double loss = contrastive_loss(e1, e2, model.temperature.log_tau(), labels).item();
  EXPECT_NEAR(loss, std::log(static_cast<double>(b)), 0.15 * std::log(static_cast<double>(b)));
}

TEST(Encoders, TemperatureClampAndRange) {
  Temperature t(0.07);
  EXPECT_NEAR(t.value(), 0.07, 1e-15);
  auto v = t.parameters()[0].tensor;
  v.mutable_values()[0] = 0.3;
  t.clamp();
  EXPECT_EQ(t.value(), 1.0);
  EXPECT_THROW(Temperature(1.5), Error);
  EXPECT_THROW(Temperature(0.0), Error);
}

TEST(Encoders, WithEvalModeRestores) {
  Rng rng(1);
  RirEncoder rir({9, {4}}, rng);
  rir.set_training(true);
  const bool inside = with_eval_mode(rir, [&] { return rir.training(); });
  EXPECT_FALSE(inside);
  EXPECT_TRUE(rir.training());
}

TEST(Encoders, FeatureShapes) {
  FeatureConfig cfg;
  cfg.rir_fft_size = 64;
  sim::Rir rir;
  rir.samples.assign(64, 0.0);
  rir.samples[3] = 0.5;
  const auto f = rir_features(rir, cfg);
  ASSERT_EQ(f.size(), 33u);
  for (double v : f) EXPECT_NEAR(v, 20.0 * std::log10(0.5), 1e-9);
  rir.samples.resize(60);
  EXPECT_THROW(rir_features(rir, cfg), Error);

  dsp::Signal x{std::vector<double>(16000, 0.1), 8000.0};
  const auto s = speech_features(x, cfg);
  EXPECT_EQ(s.size() % cfg.speech_bins(), 0u);
  EXPECT_EQ(s.size() / cfg.speech_bins(), 1u + (16000u - cfg.frame_length) / cfg.hop);
  dsp::Signal wrong_rate{std::vector<double>(16000, 0.1), 16000.0};
  EXPECT_THROW(speech_features(wrong_rate, cfg), Error);
}

TEST(Pretrain, UniformBatchesDropRemainder) {
  std::vector<int> labels(23, 0);
  Rng rng(1);
  const auto batches = epoch_batches(labels, 5, BatchSampler::Uniform, rng);
  EXPECT_EQ(batches.size(), 4u);
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    EXPECT_EQ(b.size(), 5u);
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(seen.size(), 20u);
}

TEST(Pretrain, DistinctClassBatches) {
  std::vector<int> labels;
  for (int c = 0; c < 6; ++c) {
    for (int k = 0; k < 10; ++k) labels.push_back(c);
  }
  Rng rng(2);
  const auto batches = epoch_batches(labels, 4, BatchSampler::DistinctClass, rng);
  EXPECT_FALSE(batches.empty());
  for (const auto& b : batches) {
    std::set<int> classes;
    for (std::size_t i : b) classes.insert(labels[i]);
    EXPECT_EQ(classes.size(), b.size());
  }
}

TEST(Pretrain, LossFallsAndIsDeterministic) {
  const auto train = toy_pairs(20, 4, 9 * 3, 17, 1);
  const auto val = toy_pairs(5, 4, 9 * 3, 17, 2);
  PretrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.lr = 3e-3;
  cfg.seed = 5;
  auto run = [&] {
    DualEncoder model({9, 8, {8, 4}}, {17, {12, 4}}, 0.07, 3);
    auto result = pretrain(model, train, val, cfg);
    EXPECT_LE(model.temperature.value(), 1.0);
    return result;
  };
  const auto a = run();
  const auto b = run();
  EXPECT_LT(a.final_train_loss, 0.8 * a.initial_train_loss);
  EXPECT_EQ(a.steps, 15u * 5u);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].loss, b.curve[i].loss);
}

TEST(Pretrain, RejectsBadConfig) {
  const auto train = toy_pairs(2, 2, 9, 17, 1);
  DualEncoder model({9, 8, {4}}, {17, {4}}, 0.07, 3);
  PretrainConfig cfg;
  cfg.batch_size = 10;
  EXPECT_THROW(pretrain(model, train, train, cfg), Error);
  PairedFeatures broken = train;
  broken.labels.pop_back();
  cfg.batch_size = 2;
  EXPECT_THROW(pretrain(model, broken, train, cfg), Error);
}
