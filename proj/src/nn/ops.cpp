#include "revrir/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "revrir/error.hpp"

namespace revrir::nn {
namespace {

void require_matrix(const Tensor& t, const char* what) {
  require(t.defined() && t.rank() == 2, ErrorKind::Validation,
          std::string(what) + " must be a 2-D tensor");
}

void check_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::Numeric, std::string("non-finite value from ") + op);
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  require(b.dim(0) == k, ErrorKind::Validation,
          "matmul shape mismatch " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
  std::vector<double> out(n * m, 0.0);
  const double* A = a.values().data();
  const double* B = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
    }
  }
  return Tensor::from_op({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto& G = self.grad;
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    if (na.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += G[i * m + j] * nb.value[p * m + j];
          na.grad[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = na.value[i * k + p];
          for (std::size_t j = 0; j < m; ++j) nb.grad[p * m + j] += av * G[i * m + j];
        }
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear input");
  require_matrix(weight, "linear weight");
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = weight.dim(1);
  require(weight.dim(0) == in, ErrorKind::Validation,
          "linear input " + shape_string(x.shape()) + " does not match weight " +
              shape_string(weight.shape()));
  require(bias.numel() == out_dim, ErrorKind::Validation, "linear bias size mismatch");
  std::vector<double> out(n * out_dim);
  const double* X = x.values().data();
  const double* W = weight.values().data();
  const double* b = bias.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * out_dim;
    std::copy(b, b + out_dim, row);
    for (std::size_t p = 0; p < in; ++p) {
      const double xv = X[i * in + p];
      if (xv == 0.0) continue;
      const double* wrow = W + p * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) row[j] += xv * wrow[j];
    }
  }
  check_finite(out, "linear");
  return Tensor::from_op({n, out_dim}, std::move(out), {x, weight, bias},
                         [n, in, out_dim](Node& self) {
    const auto& G = self.grad;
    Node& nx = *self.parents[0];
    Node& nw = *self.parents[1];
    Node& nb = *self.parents[2];
    if (nx.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G.data() + i * out_dim;
        for (std::size_t p = 0; p < in; ++p) {
          const double* wrow = nw.value.data() + p * out_dim;
          double acc = 0.0;
          for (std::size_t j = 0; j < out_dim; ++j) acc += grow[j] * wrow[j];
          nx.grad[i * in + p] += acc;
        }
      }
    }
    if (nw.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G.data() + i * out_dim;
        for (std::size_t p = 0; p < in; ++p) {
          const double xv = nx.value[i * in + p];
          if (xv == 0.0) continue;
          double* gw = nw.grad.data() + p * out_dim;
          for (std::size_t j = 0; j < out_dim; ++j) gw[j] += xv * grow[j];
        }
      }
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < out_dim; ++j) nb.grad[j] += G[i * out_dim + j];
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::from_op(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& nx = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (nx.value[i] > 0.0) nx.grad[i] += self.grad[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorKind::Validation, "add shape mismatch");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  return Tensor::from_op(x.shape(), std::move(out), {x}, [factor](Node& self) {
    Node& nx = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += factor * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::from_op({1}, {s}, {x}, [](Node& self) {
    Node& nx = *self.parents[0];
    for (double& g : nx.grad) g += self.grad[0];
  });
}

Tensor dot_const(const Tensor& x, std::span<const double> weights) {
  require(weights.size() == x.numel(), ErrorKind::Validation, "dot_const size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x.values()[i] * weights[i];
  std::vector<double> w(weights.begin(), weights.end());
  return Tensor::from_op({1}, {s}, {x}, [w = std::move(w)](Node& self) {
    Node& nx = *self.parents[0];
    for (std::size_t i = 0; i < w.size(); ++i) nx.grad[i] += w[i] * self.grad[0];
  });
}

Tensor mean_pool_rows(const Tensor& x, std::size_t groups) {
  require_matrix(x, "pooling input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  require(groups > 0 && rows % groups == 0, ErrorKind::Validation,
          "pooling rows are not divisible into equal groups");
  const std::size_t per = rows / groups;
  const double inv = 1.0 / static_cast<double>(per);
  std::vector<double> out(groups * cols, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t r = 0; r < per; ++r) {
      const double* src = x.values().data() + (g * per + r) * cols;
      for (std::size_t c = 0; c < cols; ++c) out[g * cols + c] += src[c];
    }
  }
  for (double& v : out) v *= inv;
  return Tensor::from_op({groups, cols}, std::move(out), {x}, [groups, per, cols, inv](Node& self) {
    Node& nx = *self.parents[0];
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t r = 0; r < per; ++r) {
        double* dst = nx.grad.data() + (g * per + r) * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] += self.grad[g * cols + c] * inv;
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_matrix(x, "normalization input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.numel());
  std::vector<double> norms(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* src = x.values().data() + i * cols;
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += src[c] * src[c];
    norms[i] = std::max(std::sqrt(ss), 1e-12);
    for (std::size_t c = 0; c < cols; ++c) out[i * cols + c] = src[c] / norms[i];
  }
  return Tensor::from_op({rows, cols}, std::move(out), {x},
                         [rows, cols, norms = std::move(norms)](Node& self) {
    Node& nx = *self.parents[0];
    for (std::size_t i = 0; i < rows; ++i) {
      const double* y = self.value.data() + i * cols;
      const double* g = self.grad.data() + i * cols;
      double proj = 0.0;
      for (std::size_t c = 0; c < cols; ++c) proj += y[c] * g[c];
      for (std::size_t c = 0; c < cols; ++c) {
        nx.grad[i * cols + c] += (g[c] - y[c] * proj) / norms[i];
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::Validation, "dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * mask[i];
  return Tensor::from_op(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    Node& nx = *self.parents[0];
    for (std::size_t i = 0; i < mask.size(); ++i) nx.grad[i] += mask[i] * self.grad[i];
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_matrix(logits, "logits");
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  require(labels.size() == n && n > 0, ErrorKind::Validation,
          "label count does not match logits rows");
  std::vector<double> probs(n * classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes,
            ErrorKind::Validation, "label " + std::to_string(labels[i]) + " out of range");
    const double* z = logits.values().data() + i * classes;
    const double zmax = *std::max_element(z, z + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
    const double lse = zmax + std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) probs[i * classes + c] = std::exp(z[c] - lse);
    loss += lse - z[labels[i]];
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) fail(ErrorKind::Numeric, "non-finite cross-entropy");
  std::vector<int> lab(labels.begin(), labels.end());
  return Tensor::from_op({1}, {loss}, {logits},
                         [n, classes, probs = std::move(probs), lab = std::move(lab)](Node& self) {
    Node& nz = *self.parents[0];
    const double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double target = static_cast<int>(c) == lab[i] ? 1.0 : 0.0;
        nz.grad[i * classes + c] += g * (probs[i * classes + c] - target);
      }
    }
  });
}

std::vector<int> argmax_rows(const Tensor& x) {
  require_matrix(x, "argmax input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<int> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* r = x.values().data() + i * cols;
    out[i] = static_cast<int>(std::max_element(r, r + cols) - r);
  }
  return out;
}

}  // namespace revrir::nn
