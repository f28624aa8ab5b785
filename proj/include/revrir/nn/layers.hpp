#pragma once

#include <memory>
#include <string>
#include <vector>

#include "revrir/nn/ops.hpp"
#include "revrir/nn/tensor.hpp"
#include "revrir/rng.hpp"

namespace revrir::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class Module {
 public:
  virtual ~Module() = default;

  /// Appends trainable parameters and non-trainable buffers under `prefix`.
  virtual void collect(const std::string& prefix, std::vector<NamedTensor>& params,
                       std::vector<NamedTensor>& buffers) const = 0;

  virtual void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  std::vector<NamedTensor> parameters(const std::string& prefix = "") const;
  std::vector<NamedTensor> buffers(const std::string& prefix = "") const;

  /// Frozen parameters do not record gradients.
  void set_frozen(bool frozen);

 protected:
  bool training_ = true;
};

/// y = x W + b, W Xavier-uniform in +-sqrt(6/(in+out)), b = 0.
class Linear : public Module {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const { return linear(x, weight_, bias_); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params,
               std::vector<NamedTensor>& buffers) const override;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Per-feature batch normalization over the rows of a 2-D input. Training
/// mode normalizes with batch statistics and updates the running estimates;
/// eval mode uses the running estimates only.
class BatchNorm1d : public Module {
 public:
  explicit BatchNorm1d(std::size_t features, double momentum = 0.1, double epsilon = 1e-5);

  Tensor forward(const Tensor& x);
  void collect(const std::string& prefix, std::vector<NamedTensor>& params,
               std::vector<NamedTensor>& buffers) const override;

  const Tensor& gamma() const { return gamma_; }
  const Tensor& shift() const { return shift_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

 private:
  Tensor gamma_;
  Tensor shift_;
  Tensor running_mean_;
  Tensor running_var_;
  double momentum_;
  double epsilon_;
};

class Dropout : public Module {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

  Tensor forward(const Tensor& x) { return dropout(x, rate_, training_, rng_); }
  void collect(const std::string&, std::vector<NamedTensor>&,
               std::vector<NamedTensor>&) const override {}

 private:
  double rate_;
  Rng rng_;
};

/// Linear -> ReLU -> BatchNorm.
class FeedForwardBlock : public Module {
 public:
  FeedForwardBlock(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x);
  void collect(const std::string& prefix, std::vector<NamedTensor>& params,
               std::vector<NamedTensor>& buffers) const override;
  void set_training(bool training) override;

  std::size_t out_features() const { return linear_.out_features(); }

 private:
  Linear linear_;
  BatchNorm1d norm_;
};

}  // namespace revrir::nn
