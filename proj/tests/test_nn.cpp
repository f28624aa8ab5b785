#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "revrir/error.hpp"
#include "revrir/nn/checkpoint.hpp"
#include "revrir/nn/layers.hpp"
#include "revrir/nn/ops.hpp"
#include "revrir/nn/optim.hpp"

using namespace revrir;
using namespace revrir::nn;

namespace {

constexpr double kTol = 1e-4;

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = true, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor(std::move(shape), std::move(v), grad);
}

std::vector<double> probe_weights(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(n);
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

}  // namespace

TEST(Tensor, ShapeChecks) {
  EXPECT_EQ(numel({2, 3, 4}), 24u);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), Error);
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), Error);
  EXPECT_THROW(Tensor::zeros({2}).item(), Error);
}

TEST(Tensor, GradientsAccumulateAcrossUses) {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = add(scale(x, 2.0), scale(x, 5.0));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Tensor, DetachCutsHistory) {
  Tensor x = random_tensor({2, 2}, 1);
  Tensor d = scale(x, 2.0).detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_EQ(d.values()[0], 2.0 * x.values()[0]);
}

TEST(Gradients, Matmul) {
  Tensor a = random_tensor({3, 4}, 1), b = random_tensor({4, 2}, 2);
  const auto w = probe_weights(6, 3);
  EXPECT_LT(gradcheck::check({a, b}, [&] { return dot_const(matmul(a, b), w); }).max_relative_error, kTol);
}

TEST(Gradients, LinearOp) {
  Tensor x = random_tensor({5, 3}, 1), W = random_tensor({3, 4}, 2), b = random_tensor({4}, 3);
  const auto w = probe_weights(20, 4);
  EXPECT_LT(gradcheck::check({x, W, b}, [&] { return dot_const(linear(x, W, b), w); }).max_relative_error,
            kTol);
}

TEST(Gradients, Relu) {
  // Values kept away from the kink.
  std::vector<double> v = {-1.2, 0.7, 2.1, -0.3, 0.4, -2.2};
  Tensor x({2, 3}, v, true);
  const auto w = probe_weights(6, 5);
  EXPECT_LT(gradcheck::check({x}, [&] { return dot_const(relu(x), w); }).max_relative_error, kTol);
}

TEST(Gradients, AddScaleSum) {
  Tensor a = random_tensor({3, 3}, 1), b = random_tensor({3, 3}, 2);
  EXPECT_LT(gradcheck::check({a, b}, [&] { return sum(scale(add(a, b), -1.7)); }).max_relative_error, kTol);
}

TEST(Gradients, MeanPoolRows) {
  Tensor x = random_tensor({6, 3}, 1);
  const auto w = probe_weights(6, 2);
  EXPECT_LT(gradcheck::check({x}, [&] { return dot_const(mean_pool_rows(x, 2), w); }).max_relative_error,
            kTol);
}

TEST(Gradients, L2NormalizeRows) {
  Tensor x = random_tensor({4, 5}, 1);
  const auto w = probe_weights(20, 2);
  EXPECT_LT(gradcheck::check({x}, [&] { return dot_const(l2_normalize_rows(x), w); }).max_relative_error,
            kTol);
}

TEST(Gradients, DropoutWithFixedMask) {
  Tensor x = random_tensor({4, 6}, 1);
  const auto w = probe_weights(24, 2);
  auto loss = [&] {
    Rng rng(99);
    return dot_const(dropout(x, 0.3, true, rng), w);
  };
  EXPECT_LT(gradcheck::check({x}, loss).max_relative_error, kTol);
}

TEST(Gradients, SoftmaxCrossEntropy) {
  Tensor logits = random_tensor({5, 4}, 1);
  const std::vector<int> labels = {0, 3, 1, 1, 2};
  EXPECT_LT(gradcheck::check({logits}, [&] { return softmax_cross_entropy(logits, labels); })
                .max_relative_error,
            kTol);
}

TEST(Gradients, LinearLayer) {
  Rng rng(1);
  Linear layer(4, 3, rng);
  Tensor x = random_tensor({5, 4}, 2);
  const auto w = probe_weights(15, 3);
  auto leaves = tensors_of(layer.parameters());
  leaves.push_back(x);
  EXPECT_LT(gradcheck::check(leaves, [&] { return dot_const(layer.forward(x), w); }).max_relative_error,
            kTol);
}

TEST(Gradients, BatchNormTraining) {
  BatchNorm1d bn(3);
  auto params = tensors_of(bn.parameters());
  // Non-trivial affine parameters so every path is exercised.
  params[0].mutable_values()[1] = 1.7;
  params[1].mutable_values()[2] = -0.4;
  Tensor x = random_tensor({6, 3}, 2);
  const auto w = probe_weights(18, 3);
  auto leaves = params;
  leaves.push_back(x);
  EXPECT_LT(gradcheck::check(leaves, [&] { return dot_const(bn.forward(x), w); }).max_relative_error,
            kTol);
}

TEST(Gradients, FeedForwardBlock) {
  Rng rng(4);
  FeedForwardBlock block(5, 4, rng);
  Tensor x = random_tensor({8, 5}, 5);
  const auto w = probe_weights(32, 6);
  auto leaves = tensors_of(block.parameters());
  leaves.push_back(x);
  EXPECT_LT(gradcheck::check(leaves, [&] { return dot_const(block.forward(x), w); }).max_relative_error,
            kTol);
}

TEST(Layers, XavierRangeAndZeroBias) {
  Rng rng(1);
  Linear layer(30, 20, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double v : layer.weight().values()) EXPECT_LE(std::abs(v), limit);
  for (double v : layer.bias().values()) EXPECT_EQ(v, 0.0);
}

TEST(Layers, BatchNormEvalUsesRunningStatistics) {
  BatchNorm1d bn(2, 0.1, 1e-5);
  Tensor x({4, 2}, {1, 10, 3, 10, 5, 10, 7, 10});
  bn.forward(x);
  // momentum 0.1: running mean moves 10% of the way from 0 to the batch mean,
  // running variance from 1 toward the unbiased batch variance.
  EXPECT_NEAR(bn.running_mean().values()[0], 0.4, 1e-12);
  EXPECT_NEAR(bn.running_var().values()[0], 0.9 + 0.1 * (20.0 / 3.0), 1e-12);
  bn.set_training(false);
  Tensor y = bn.forward(Tensor({1, 2}, {0.4, 1.0}));
  EXPECT_NEAR(y.values()[0], 0.0, 1e-12);
}

TEST(Layers, FrozenModuleRecordsNoGradient) {
  Rng rng(1);
  Linear layer(3, 2, rng);
  layer.set_frozen(true);
  Tensor x = random_tensor({2, 3}, 2);
  Tensor y = sum(layer.forward(x));
  y.backward();
  EXPECT_FALSE(layer.weight().has_grad());
  EXPECT_TRUE(x.has_grad());
}

TEST(Layers, DropoutIsIdentityInEval) {
  Dropout d(0.5, 3);
  d.set_training(false);
  Tensor x = random_tensor({3, 3}, 1, false);
  Tensor y = d.forward(x);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y.values()[i], x.values()[i]);
}

TEST(Optim, AdamWDecayOnlyStep) {
  Tensor p({1}, {1.0}, true);
  AdamW opt({{"p", p}}, {.weight_decay = 1.0});
  p.mutable_grad()[0] = 0.0;
  opt.step(1e-3);
  EXPECT_NEAR(p.values()[0], 0.999, 1e-12);
}

TEST(Optim, AdamWFirstStep) {
  Tensor p({2}, {0.5, -0.25}, true);
  AdamW opt({{"p", p}}, {.weight_decay = 0.0});
  p.mutable_grad()[0] = 1.0;
  p.mutable_grad()[1] = -3.0;
  opt.step(1e-3);
  // Bias correction makes m_hat = g and v_hat = g^2 after one step.
  EXPECT_NEAR(p.values()[0], 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p.values()[1], -0.25 + 1e-3 * 3.0 / (3.0 + 1e-8), 1e-12);
}

TEST(Optim, AdamWSecondStepByHand) {
  Tensor p({1}, {0.0}, true);
  AdamW opt({{"p", p}}, {.weight_decay = 0.0});
  p.mutable_grad()[0] = 1.0;
  opt.step(0.1);
  p.zero_grad();
  p.mutable_grad()[0] = 2.0;
  opt.step(0.1);
  const double m = 0.9 * 0.1 + 0.1 * 2.0;
  const double v = 0.999 * 0.001 + 0.001 * 4.0;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  const double after_first = -0.1 / (1.0 + 1e-8);
  EXPECT_NEAR(p.values()[0], after_first - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
}

TEST(Optim, AdamWStateRoundTrip) {
  Tensor p({2}, {1.0, 2.0}, true);
  AdamW opt({{"p", p}});
  p.mutable_grad()[0] = 0.3;
  p.mutable_grad()[1] = -0.1;
  opt.step(0.01);
  Tensor q({2}, {1.0, 2.0}, true);
  AdamW other({{"p", q}});
  other.load_state(opt.state());
  EXPECT_EQ(other.step_count(), 1u);
  EXPECT_EQ(other.state(), opt.state());
}

TEST(Schedule, LinearWarmupClosedForm) {
  LrSchedule s{ScheduleKind::LinearWarmup, 0.5, 100, 0.1, 1.0};
  ASSERT_EQ(s.warmup_steps(), 10u);
  EXPECT_EQ(lr_at(s, 0), 0.0);
  EXPECT_EQ(lr_at(s, 5), 0.25);
  EXPECT_EQ(lr_at(s, 10), 0.5);
  EXPECT_EQ(lr_at(s, 50), 0.5 * 50.0 / 90.0);
  EXPECT_EQ(lr_at(s, 100), 0.0);
  EXPECT_THROW(lr_at(s, 101), Error);
}

TEST(Schedule, PolynomialClosedForm) {
  LrSchedule s{ScheduleKind::Polynomial, 1e-4, 200, 0.0, 0.1};
  EXPECT_EQ(lr_at(s, 0), 1e-4);
  EXPECT_EQ(lr_at(s, 100), 1e-4 * std::pow(0.5, 0.1));
  EXPECT_EQ(lr_at(s, 200), 0.0);
}

TEST(Schedule, InvalidSchedulesRejected) {
  EXPECT_THROW((LrSchedule{ScheduleKind::LinearWarmup, 1e-3, 0, 0.1, 1.0}.validate()), Error);
  EXPECT_THROW((LrSchedule{ScheduleKind::LinearWarmup, 1e-3, 10, 1.5, 1.0}.validate()), Error);
  EXPECT_THROW((LrSchedule{ScheduleKind::Polynomial, -1.0, 10, 0.0, 1.0}.validate()), Error);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(3);
  FeedForwardBlock block(4, 3, rng);
  block.forward(random_tensor({5, 4}, 1, false));
  Checkpoint ck;
  ck.meta["kind"] = "test";
  export_module(block, "block.", ck);
  ck.optimizer.push_back({"step", {1}, {7.0}});
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ck));
  EXPECT_EQ(back, ck);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));

  Rng other(4);
  FeedForwardBlock fresh(4, 3, other);
  import_module(fresh, "block.", back);
  Checkpoint again;
  export_module(fresh, "block.", again);
  EXPECT_EQ(again.params, ck.params);
  EXPECT_EQ(parameter_hash(again), parameter_hash(ck));
}

TEST(Checkpoint, HashTracksParameterValues) {
  Rng rng(3);
  Linear layer(3, 2, rng);
  Checkpoint a, b;
  export_module(layer, "", a);
  auto w = layer.parameters()[0].tensor;
  w.mutable_values()[0] += 1e-9;
  export_module(layer, "", b);
  EXPECT_NE(parameter_hash(a), parameter_hash(b));
  EXPECT_EQ(parameter_hash(a).size(), 16u);
}

TEST(Checkpoint, CorruptBytesAreFormatErrors) {
  Rng rng(3);
  Linear layer(3, 2, rng);
  Checkpoint ck;
  export_module(layer, "l.", ck);
  std::string bytes = serialize_checkpoint(ck);
  for (std::string bad : {bytes.substr(0, bytes.size() - 3), std::string("XXXX") + bytes.substr(4),
                          std::string()}) {
    try {
      deserialize_checkpoint(bad);
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Format);
    }
  }
}

TEST(Checkpoint, ImportRejectsMissingOrMisshapen) {
  Rng rng(3);
  Linear small(3, 2, rng), big(4, 2, rng);
  Checkpoint ck;
  export_module(small, "l.", ck);
  EXPECT_THROW(import_module(big, "l.", ck), Error);
  EXPECT_THROW(import_module(small, "other.", ck), Error);
}
