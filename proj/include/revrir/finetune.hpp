#pragma once

// Classification heads on top of a pre-trained tower.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "revrir/encoders.hpp"
#include "revrir/matrix.hpp"
#include "revrir/nn/layers.hpp"

namespace revrir::tasks {

enum class EncoderChoice { Speech, Rir };

const char* to_string(EncoderChoice choice);
EncoderChoice encoder_choice_from_string(const std::string& name);

/// Single linear layer from the embedding (d) to the room classes (M).
class ClassifierHead : public nn::Module {
 public:
  ClassifierHead(std::size_t embedding_dim, std::size_t classes, Rng& rng);

  nn::Tensor forward(const nn::Tensor& embeddings) const { return linear_.forward(embeddings); }
  std::size_t embedding_dim() const { return linear_.in_features(); }
  std::size_t classes() const { return linear_.out_features(); }
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
               std::vector<nn::NamedTensor>& buffers) const override;

 private:
  nn::Linear linear_;
};

struct FinetuneConfig {
  EncoderChoice encoder = EncoderChoice::Speech;
  bool freeze_encoder = true;
  std::size_t epochs = 50;
  std::size_t batch_size = 100;
  double lr = 1e-4;
  double power = 0.1;  // polynomial decay exponent
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  /// Frozen runs embed every item once up front. When false, a frozen
  /// encoder is re-run on every batch instead; both give the same head.
  bool use_cache = true;

  void validate() const;
};

/// Encoder inputs with room labels.
struct LabeledFeatures {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FinetuneResult {
  std::vector<EpochMetrics> history;
  std::size_t steps = 0;
};

/// Cross-entropy training of `head` (and of `encoder` unless frozen). With
/// a frozen encoder its parameters and running statistics are left bitwise
/// untouched. Validation accuracy is reported after every epoch.
FinetuneResult finetune(joint::Encoder& encoder, ClassifierHead& head,
                        const LabeledFeatures& train, const LabeledFeatures& val,
                        const FinetuneConfig& config);

/// Head-only training on precomputed embeddings (rows of `train`).
FinetuneResult finetune_head(ClassifierHead& head, const Matrix& train,
                             std::span<const int> train_labels, const Matrix& val,
                             std::span<const int> val_labels, const FinetuneConfig& config);

/// Argmax class per embedding row.
std::vector<int> predict(const ClassifierHead& head, const Matrix& embeddings);

/// Eval-mode predictions of encoder + head on raw features.
std::vector<int> predict(joint::Encoder& encoder, const ClassifierHead& head,
                         std::span<const std::vector<double>> features);

}  // namespace revrir::tasks
