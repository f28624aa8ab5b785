#pragma once

// Joint-embedding contrastive objective between reverberant-speech
// embeddings (E1) and RIR embeddings (E2).
//
// With S = E1 E2^T / tau and N_i = { j : label(j) == label(i) },
//   loss[E1, E2] = (1/B) sum_i -(1/|N_i|) sum_{j in N_i} log softmax_row(S)_ij
//   loss[E2, E1] = the same with S^T
//   L = (loss[E1, E2] + loss[E2, E1]) / 2.
// Every row sharing the anchor's room class is a positive, so an utterance
// and an RIR from the same room attract even when the utterance was not
// rendered with that exact RIR.

#include <span>
#include <vector>

#include "revrir/matrix.hpp"
#include "revrir/nn/tensor.hpp"

namespace revrir::joint {

struct EmbeddingBatch {
  Matrix e1;
  Matrix e2;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  /// Shapes agree, batch non-empty, every row unit-norm within 1e-6.
  void validate() const;
};

/// Row-stochastic (B x B): softmax over k of e1_i . e2_k / tau.
Matrix smdp(const Matrix& e1, const Matrix& e2, double tau);

struct ContrastiveTerms {
  double loss = 0.0;          // L
  double speech_to_rir = 0.0;  // loss[E1, E2]
  double rir_to_speech = 0.0;  // loss[E2, E1]
};

ContrastiveTerms contrastive_terms(const EmbeddingBatch& batch, double tau);
double contrastive_loss(const EmbeddingBatch& batch, double tau);

/// Differentiable form. `log_tau` is a one-element tensor holding log(tau);
/// rows of e1/e2 are used as given (normalize upstream).
nn::Tensor contrastive_loss(const nn::Tensor& e1, const nn::Tensor& e2,
                            const nn::Tensor& log_tau, std::span<const int> labels);

/// Loss plus analytic gradients with respect to E1, E2 and tau itself.
struct ContrastiveGradients {
  double loss = 0.0;
  Matrix d_e1;
  Matrix d_e2;
  double d_tau = 0.0;
};
ContrastiveGradients contrastive_gradients(const Matrix& e1, const Matrix& e2,
                                           std::span<const int> labels, double tau);

}  // namespace revrir::joint
