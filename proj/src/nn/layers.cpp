#include "revrir/nn/layers.hpp"

#include <cmath>

#include "revrir/error.hpp"

namespace revrir::nn {

std::vector<NamedTensor> Module::parameters(const std::string& prefix) const {
  std::vector<NamedTensor> params, buffers;
  collect(prefix, params, buffers);
  return params;
}

std::vector<NamedTensor> Module::buffers(const std::string& prefix) const {
  std::vector<NamedTensor> params, buffers;
  collect(prefix, params, buffers);
  return buffers;
}

void Module::set_frozen(bool frozen) {
  for (auto& p : parameters()) {
    p.tensor.set_requires_grad(!frozen);
    p.tensor.zero_grad();
  }
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  require(in > 0 && out > 0, ErrorKind::Validation, "linear layer needs non-zero sizes");
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.uniform(-limit, limit);
  weight_ = Tensor({in, out}, std::move(w), true);
  bias_ = Tensor::zeros({out}, true);
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& params,
                     std::vector<NamedTensor>&) const {
  params.push_back({prefix + "weight", weight_});
  params.push_back({prefix + "bias", bias_});
}

BatchNorm1d::BatchNorm1d(std::size_t features, double momentum, double epsilon)
    : gamma_(Tensor::full({features}, 1.0, true)),
      shift_(Tensor::zeros({features}, true)),
      running_mean_(Tensor::zeros({features})),
      running_var_(Tensor::full({features}, 1.0)),
      momentum_(momentum),
      epsilon_(epsilon) {}

void BatchNorm1d::collect(const std::string& prefix, std::vector<NamedTensor>& params,
                          std::vector<NamedTensor>& buffers) const {
  params.push_back({prefix + "gamma", gamma_});
  params.push_back({prefix + "beta", shift_});
  buffers.push_back({prefix + "running_mean", running_mean_});
  buffers.push_back({prefix + "running_var", running_var_});
}

Tensor BatchNorm1d::forward(const Tensor& x) {
  require(x.rank() == 2 && x.dim(1) == gamma_.numel(), ErrorKind::Validation,
          "batch norm input " + shape_string(x.shape()) + " does not match " +
              std::to_string(gamma_.numel()) + " features");
  const std::size_t n = x.dim(0), f = x.dim(1);
  const double* X = x.values().data();
  const double* g = gamma_.values().data();
  const double* b = shift_.values().data();
  std::vector<double> mean(f, 0.0), inv_std(f, 0.0);

  if (training_) {
    require(n >= 2, ErrorKind::Validation, "batch norm in training mode needs at least 2 rows");
    std::vector<double> var(f, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < f; ++c) mean[c] += X[i * f + c];
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < f; ++c) {
        const double d = X[i * f + c] - mean[c];
        var[c] += d * d;
      }
    auto rm = running_mean_.mutable_values();
    auto rv = running_var_.mutable_values();
    for (std::size_t c = 0; c < f; ++c) {
      const double biased = var[c] / static_cast<double>(n);
      inv_std[c] = 1.0 / std::sqrt(biased + epsilon_);
      rm[c] = (1.0 - momentum_) * rm[c] + momentum_ * mean[c];
      rv[c] = (1.0 - momentum_) * rv[c] + momentum_ * var[c] / static_cast<double>(n - 1);
    }
  } else {
    const auto rm = running_mean_.values();
    const auto rv = running_var_.values();
    for (std::size_t c = 0; c < f; ++c) {
      mean[c] = rm[c];
      inv_std[c] = 1.0 / std::sqrt(rv[c] + epsilon_);
    }
  }

  std::vector<double> xhat(n * f), out(n * f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < f; ++c) {
      const double h = (X[i * f + c] - mean[c]) * inv_std[c];
      xhat[i * f + c] = h;
      out[i * f + c] = g[c] * h + b[c];
    }

  const bool batch_stats = training_;
  return Tensor::from_op(
      {n, f}, std::move(out), {x, gamma_, shift_},
      [n, f, batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& nx = *self.parents[0];
        Node& ng = *self.parents[1];
        Node& nb = *self.parents[2];
        const auto& G = self.grad;
        std::vector<double> sum_dy(f, 0.0), sum_dy_xhat(f, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < f; ++c) {
            sum_dy[c] += G[i * f + c];
            sum_dy_xhat[c] += G[i * f + c] * xhat[i * f + c];
          }
        if (ng.requires_grad)
          for (std::size_t c = 0; c < f; ++c) ng.grad[c] += sum_dy_xhat[c];
        if (nb.requires_grad)
          for (std::size_t c = 0; c < f; ++c) nb.grad[c] += sum_dy[c];
        if (!nx.requires_grad) return;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < f; ++c) {
            const double scale = ng.value[c] * inv_std[c];
            const double dy = G[i * f + c];
            if (batch_stats) {
              nx.grad[i * f + c] +=
                  scale * (dy - inv_n * sum_dy[c] - xhat[i * f + c] * inv_n * sum_dy_xhat[c]);
            } else {
              nx.grad[i * f + c] += scale * dy;
            }
          }
      });
}

FeedForwardBlock::FeedForwardBlock(std::size_t in, std::size_t out, Rng& rng)
    : linear_(in, out, rng), norm_(out) {}

Tensor FeedForwardBlock::forward(const Tensor& x) {
  return norm_.forward(relu(linear_.forward(x)));
}

void FeedForwardBlock::collect(const std::string& prefix, std::vector<NamedTensor>& params,
                               std::vector<NamedTensor>& buffers) const {
  linear_.collect(prefix + "linear.", params, buffers);
  norm_.collect(prefix + "bn.", params, buffers);
}

void FeedForwardBlock::set_training(bool training) {
  Module::set_training(training);
  linear_.set_training(training);
  norm_.set_training(training);
}

}  // namespace revrir::nn
