#include <gtest/gtest.h>

#include <cmath>

#include "revrir/baseline.hpp"
#include "revrir/error.hpp"
#include "revrir/finetune.hpp"
#include "revrir/metrics.hpp"
#include "revrir/nn/checkpoint.hpp"

using namespace revrir;
using namespace revrir::tasks;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Validation;
}

LabeledFeatures toy_features(std::size_t per_class, std::size_t classes, std::size_t dim,
                             std::uint64_t seed) {
  Rng rng(seed);
  LabeledFeatures f;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      std::vector<double> v(dim);
      for (std::size_t i = 0; i < dim; ++i) v[i] = 15.0 * std::cos(0.9 * (c + 1) * i) + 3.0 * rng.normal();
      f.inputs.push_back(std::move(v));
      f.labels.push_back(static_cast<int>(c));
    }
  }
  return f;
}

std::string encoder_hash(const joint::Encoder& encoder) {
  nn::Checkpoint ck;
  nn::export_module(encoder, "", ck);
  return nn::parameter_hash(ck);
}

sim::Rir exponential_rir(double t60_tau, std::size_t n = 4096, double gain = 1.0,
                         std::uint64_t seed = 1) {
  Rng rng(seed);
  sim::Rir r;
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.samples[i] = gain * rng.normal() * std::exp(-static_cast<double>(i) / 8000.0 / t60_tau);
  }
  r.samples[0] = 4.0 * gain;
  return r;
}

}  // namespace

TEST(Metrics, Top1Accuracy) {
  const std::vector<int> p = {0, 1, 2, 2}, l = {0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(top1_accuracy(p, l), 0.75);
  EXPECT_EQ(kind_of([&] { top1_accuracy(p, std::vector<int>{0}); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] { top1_accuracy({}, {}); }), ErrorKind::Validation);
}

TEST(Metrics, ConfusionRowsNormalized) {
  const std::vector<int> p = {0, 1, 1, 0, 2}, l = {0, 0, 1, 1, 1};
  const auto cm = confusion(p, l, 3);
  EXPECT_DOUBLE_EQ(cm.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(cm.values(0, 1), 0.5);
  EXPECT_NEAR(cm.values(1, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(cm.values(1, 2), 1.0 / 3.0, 1e-15);
  EXPECT_FALSE(cm.row_has_support(2));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(cm.values(2, j), 0.0);
  EXPECT_EQ(kind_of([&] { confusion(std::vector<int>{3}, std::vector<int>{0}, 3); }), ErrorKind::Validation);
}

TEST(Metrics, PerfectPredictionsGiveIdentity) {
  const std::vector<int> l = {0, 1, 2, 2, 1, 0};
  const auto cm = confusion(l, l, 3, type_names());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(cm.values(i, j), i == j ? 1.0 : 0.0);
  }
  EXPECT_EQ(cm.class_names, (std::vector<std::string>{"small", "large", "hall"}));
}

TEST(Metrics, CollapseToTypes) {
  const auto cat = catalog::enumerate_rooms(catalog::desk_ranges());
  const std::vector<int> rooms = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(collapse_to_types(rooms, cat), (std::vector<int>{0, 0, 1, 1, 2, 2}));
  EXPECT_EQ(kind_of([&] { collapse_to_types(std::vector<int>{6}, cat); }), ErrorKind::Lookup);
  const auto names = room_names(cat);
  ASSERT_EQ(names.size(), 6u);
  EXPECT_EQ(names[0].rfind("small-", 0), 0u);
}

TEST(Metrics, MeanStd) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const auto ms = mean_std(v);
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.stddev, std::sqrt(1.25));
}

TEST(Finetune, FrozenEncoderIsUntouched) {
  const auto train = toy_features(12, 3, 17, 1), val = toy_features(4, 3, 17, 2);
  Rng rng(3);
  joint::RirEncoder encoder({17, {12, 8}}, rng);
  const std::string before = encoder_hash(encoder);
  Rng head_rng(4);
  ClassifierHead head(8, 3, head_rng);
  FinetuneConfig cfg;
  cfg.encoder = EncoderChoice::Rir;
  cfg.epochs = 5;
  cfg.batch_size = 6;
  cfg.lr = 1e-2;
  for (bool cache : {true, false}) {
    cfg.use_cache = cache;
    finetune(encoder, head, train, val, cfg);
    EXPECT_EQ(encoder_hash(encoder), before);
  }
}

TEST(Finetune, CachedAndEndToEndHeadsAreIdentical) {
  const auto train = toy_features(10, 3, 17, 5), val = toy_features(4, 3, 17, 6);
  auto run = [&](bool cache) {
    Rng rng(3);
    joint::RirEncoder encoder({17, {12, 8}}, rng);
    Rng head_rng(4);
    ClassifierHead head(8, 3, head_rng);
    FinetuneConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 5;
    cfg.lr = 1e-2;
    cfg.seed = 9;
    cfg.use_cache = cache;
    const auto result = finetune(encoder, head, train, val, cfg);
    nn::Checkpoint ck;
    nn::export_module(head, "", ck);
    return std::make_pair(nn::serialize_checkpoint(ck), result.history.back().val_accuracy);
  };
  const auto cached = run(true), direct = run(false);
  EXPECT_EQ(cached.first, direct.first);
  EXPECT_EQ(cached.second, direct.second);
}

TEST(Finetune, HeadLearnsSeparableData) {
  const auto train = toy_features(30, 3, 17, 7), val = toy_features(10, 3, 17, 8);
  Rng rng(3);
  joint::RirEncoder encoder({17, {16, 8}}, rng);
  Rng head_rng(4);
  ClassifierHead head(8, 3, head_rng);
  FinetuneConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 10;
  cfg.lr = 3e-2;
  const auto result = finetune(encoder, head, train, val, cfg);
  EXPECT_EQ(result.history.size(), 30u);
  EXPECT_GT(result.history.back().val_accuracy, 0.8);
  EXPECT_EQ(predict(encoder, head, val.inputs).size(), val.size());
}

TEST(Finetune, UnfrozenTrainingMovesEncoder) {
  const auto train = toy_features(8, 2, 9, 1), val = toy_features(2, 2, 9, 2);
  Rng rng(3);
  joint::RirEncoder encoder({9, {6, 4}}, rng);
  const std::string before = encoder_hash(encoder);
  Rng head_rng(4);
  ClassifierHead head(4, 2, head_rng);
  FinetuneConfig cfg;
  cfg.freeze_encoder = false;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  finetune(encoder, head, train, val, cfg);
  EXPECT_NE(encoder_hash(encoder), before);
}

TEST(Finetune, ConfigValidation) {
  FinetuneConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(encoder_choice_from_string("rir"), EncoderChoice::Rir);
  EXPECT_EQ(std::string(to_string(EncoderChoice::Speech)), "speech");
  EXPECT_THROW(encoder_choice_from_string("video"), Error);
}

TEST(Baseline, BandEdges) {
  EXPECT_EQ(baseline_band(1).lo_hz, 50.0);
  EXPECT_EQ(baseline_band(1).hi_hz, 200.0);
  EXPECT_EQ(baseline_band(3).lo_hz, 150.0);
  EXPECT_EQ(baseline_band(3).hi_hz, 600.0);
  EXPECT_THROW(baseline_band(0), Error);
  EXPECT_THROW(baseline_band(6), Error);
  EXPECT_EQ(baseline_feature_names().size(), kBaselineFeatureCount);
}

TEST(Baseline, SchroederDecayOfExponential) {
  // Energy envelope exp(-2t/0.05) decays at 20 log10(e) / 0.05 = 173.7 dB/s.
  std::vector<double> h(8000);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::exp(-static_cast<double>(i) / 8000.0 / 0.05);
  const double rate = schroeder_decay_rate(h, 8000.0);
  const double want = -20.0 * std::log10(std::exp(1.0)) / 0.05;
  EXPECT_NEAR(rate, want, 0.05 * std::abs(want));
}

TEST(Baseline, FeaturesAreScaleInvariantAndFinite) {
  const auto a = baseline_features(exponential_rir(0.08, 4096, 1.0));
  const auto b = baseline_features(exponential_rir(0.08, 4096, 37.5));
  for (std::size_t i = 0; i < kBaselineFeatureCount; ++i) {
    EXPECT_TRUE(std::isfinite(a[i])) << i;
    EXPECT_NEAR(a[i], b[i], 1e-6 * std::max(1.0, std::abs(a[i]))) << baseline_feature_names()[i];
  }
}

TEST(Baseline, LongerDecayIsSlower) {
  const auto fast = baseline_features(exponential_rir(0.05));
  const auto slow = baseline_features(exponential_rir(0.2));
  EXPECT_LT(fast[27], slow[27]);  // more negative dB/s for the fast decay
}

TEST(Baseline, SilentRirIsFeatureError) {
  sim::Rir silent;
  silent.samples.assign(1024, 0.0);
  EXPECT_EQ(kind_of([&] { baseline_features(silent); }), ErrorKind::Feature);
}

TEST(Baseline, FeatureMatrixJobInvariant) {
  std::vector<sim::Rir> rirs;
  for (int i = 0; i < 5; ++i) rirs.push_back(exponential_rir(0.05 + 0.03 * i, 2048, 1.0, i + 1));
  const Matrix a = baseline_feature_matrix(rirs, 1), b = baseline_feature_matrix(rirs, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows, 5u);
  EXPECT_EQ(a.cols, kBaselineFeatureCount);
}

TEST(Baseline, WidthsScaleWithClassCount) {
  BaselineConfig cfg;
  EXPECT_EQ(baseline_widths(110, cfg), (std::vector<std::size_t>{65, 90, 100}));
  EXPECT_EQ(baseline_widths(6, cfg), (std::vector<std::size_t>{6, 6, 6}));
  EXPECT_EQ(baseline_widths(22, cfg), (std::vector<std::size_t>{22, 22, 22}));
}

TEST(Baseline, ClassifierLearnsAndIsDeterministic) {
  // Six classes of decay time, features from synthetic RIRs.
  const double taus[] = {0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  std::vector<sim::Rir> train, val;
  std::vector<int> train_labels, val_labels;
  for (int i = 0; i < 120; ++i) {
    const int c = i % 6;
    train.push_back(exponential_rir(taus[c], 4096, 1.0, 100 + i));
    train_labels.push_back(c);
  }
  for (int i = 0; i < 30; ++i) {
    const int c = i % 6;
    val.push_back(exponential_rir(taus[c], 4096, 1.0, 500 + i));
    val_labels.push_back(c);
  }
  const Matrix ft = baseline_feature_matrix(train), fv = baseline_feature_matrix(val);
  BaselineConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.seed = 3;
  auto run = [&] {
    BaselineClassifier model(6, cfg);
    return baseline_train_eval(model, ft, train_labels, fv, val_labels, cfg);
  };
  const auto a = run(), b = run();
  EXPECT_GE(a.accuracy, 0.75);  // chance is 1/6
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.predictions, b.predictions);
}
