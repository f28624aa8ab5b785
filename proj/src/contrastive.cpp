#include "revrir/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "revrir/error.hpp"

namespace revrir::joint {
namespace {

void check_shapes(const Matrix& e1, const Matrix& e2, std::size_t labels) {
  require(e1.rows > 0, ErrorKind::Validation, "empty embedding batch");
  require(e1.rows == e2.rows && e1.cols == e2.cols, ErrorKind::Validation,
          "embedding matrices differ in shape");
  require(labels == e1.rows, ErrorKind::Validation, "label count does not match batch size");
}

void check_tau(double tau) {
  require(tau > 0.0 && tau <= 1.0, ErrorKind::Validation, "temperature must lie in (0, 1]");
}

/// log of the row softmax of m, stabilized by row-max subtraction.
Matrix log_softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double denom = 0.0;
    for (double v : r) denom += std::exp(v - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = r[j] - lse;
  }
  return out;
}

Matrix scaled_similarity(const Matrix& e1, const Matrix& e2, double tau) {
  const std::size_t b = e1.rows, d = e1.cols;
  Matrix s(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += e1(i, c) * e2(j, c);
      s(i, j) = acc / tau;
    }
  }
  return s;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

/// Target distribution: T_ij = 1/|N_i| if label(i) == label(j).
Matrix positive_targets(std::span<const int> labels) {
  const std::size_t b = labels.size();
  Matrix t(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < b; ++j) count += labels[j] == labels[i];
    for (std::size_t j = 0; j < b; ++j) {
      if (labels[j] == labels[i]) t(i, j) = 1.0 / static_cast<double>(count);
    }
  }
  return t;
}

double directional_loss(const Matrix& log_p, const Matrix& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < log_p.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < log_p.cols; ++j) {
      if (targets(i, j) != 0.0) row -= targets(i, j) * log_p(i, j);
    }
    total += row;
  }
  return total / static_cast<double>(log_p.rows);
}

struct Forward {
  Matrix s;
  Matrix log_p;  // row softmax of S
  Matrix log_q;  // row softmax of S^T
  Matrix targets;
  ContrastiveTerms terms;
};

Forward forward(const Matrix& e1, const Matrix& e2, std::span<const int> labels, double tau) {
  Forward f;
  f.s = scaled_similarity(e1, e2, tau);
  f.log_p = log_softmax_rows(f.s);
  f.log_q = log_softmax_rows(transpose(f.s));
  f.targets = positive_targets(labels);
  f.terms.speech_to_rir = directional_loss(f.log_p, f.targets);
  f.terms.rir_to_speech = directional_loss(f.log_q, f.targets);
  f.terms.loss = 0.5 * (f.terms.speech_to_rir + f.terms.rir_to_speech);
  if (!std::isfinite(f.terms.loss)) fail(ErrorKind::Numeric, "non-finite contrastive loss");
  return f;
}

/// dL/dS = (1/2B) [(P - T) + (Q - T)^T].
Matrix similarity_gradient(const Forward& f) {
  const std::size_t b = f.s.rows;
  const double k = 0.5 / static_cast<double>(b);
  Matrix g(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      g(i, j) = k * ((std::exp(f.log_p(i, j)) - f.targets(i, j)) +
                     (std::exp(f.log_q(j, i)) - f.targets(j, i)));
    }
  }
  return g;
}

}  // namespace

void EmbeddingBatch::validate() const {
  check_shapes(e1, e2, labels.size());
  for (const Matrix* m : {&e1, &e2}) {
    for (std::size_t i = 0; i < m->rows; ++i) {
      double ss = 0.0;
      for (double v : m->row(i)) ss += v * v;
      require(std::abs(std::sqrt(ss) - 1.0) <= 1e-6, ErrorKind::Validation,
              "embedding row " + std::to_string(i) + " is not unit-norm");
    }
  }
}

Matrix smdp(const Matrix& e1, const Matrix& e2, double tau) {
  require(e1.rows > 0 && e1.rows == e2.rows && e1.cols == e2.cols, ErrorKind::Validation,
          "embedding matrices differ in shape");
  check_tau(tau);
  Matrix p = log_softmax_rows(scaled_similarity(e1, e2, tau));
  for (double& v : p.data) v = std::exp(v);
  return p;
}

ContrastiveTerms contrastive_terms(const EmbeddingBatch& batch, double tau) {
  batch.validate();
  check_tau(tau);
  return forward(batch.e1, batch.e2, batch.labels, tau).terms;
}

double contrastive_loss(const EmbeddingBatch& batch, double tau) {
  return contrastive_terms(batch, tau).loss;
}

ContrastiveGradients contrastive_gradients(const Matrix& e1, const Matrix& e2,
                                           std::span<const int> labels, double tau) {
  check_shapes(e1, e2, labels.size());
  require(tau > 0.0, ErrorKind::Validation, "temperature must be positive");
  const Forward f = forward(e1, e2, labels, tau);
  const Matrix g = similarity_gradient(f);
  const std::size_t b = e1.rows, d = e1.cols;
  ContrastiveGradients out;
  out.loss = f.terms.loss;
  out.d_e1 = Matrix(b, d);
  out.d_e2 = Matrix(b, d);
  double gs = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double gij = g(i, j) / tau;
      gs += g(i, j) * f.s(i, j);
      for (std::size_t c = 0; c < d; ++c) {
        out.d_e1(i, c) += gij * e2(j, c);
        out.d_e2(j, c) += gij * e1(i, c);
      }
    }
  }
  // S = R / tau, so dS/dtau = -S / tau.
  out.d_tau = -gs / tau;
  return out;
}

nn::Tensor contrastive_loss(const nn::Tensor& e1, const nn::Tensor& e2, const nn::Tensor& log_tau,
                            std::span<const int> labels) {
  require(e1.rank() == 2 && e2.rank() == 2, ErrorKind::Validation,
          "embeddings must be 2-D tensors");
  require(log_tau.numel() == 1, ErrorKind::Validation, "temperature must be a scalar");
  const std::size_t b = e1.dim(0), d = e1.dim(1);
  Matrix m1(b, d), m2(e2.dim(0), e2.dim(1));
  std::copy(e1.values().begin(), e1.values().end(), m1.data.begin());
  std::copy(e2.values().begin(), e2.values().end(), m2.data.begin());
  const double tau = std::exp(log_tau.item());
  ContrastiveGradients g = contrastive_gradients(m1, m2, labels, tau);
  // dL/dlog(tau) = tau * dL/dtau.
  const double d_log_tau = tau * g.d_tau;
  return nn::Tensor::from_op(
      {1}, {g.loss}, {e1, e2, log_tau},
      [d1 = std::move(g.d_e1.data), d2 = std::move(g.d_e2.data), d_log_tau](nn::Node& self) {
        const double up = self.grad[0];
        nn::Node& n1 = *self.parents[0];
        nn::Node& n2 = *self.parents[1];
        nn::Node& nt = *self.parents[2];
        if (n1.requires_grad)
          for (std::size_t i = 0; i < d1.size(); ++i) n1.grad[i] += up * d1[i];
        if (n2.requires_grad)
          for (std::size_t i = 0; i < d2.size(); ++i) n2.grad[i] += up * d2[i];
        if (nt.requires_grad) nt.grad[0] += up * d_log_tau;
      });
}

}  // namespace revrir::joint
