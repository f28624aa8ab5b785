#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "revrir/encoders.hpp"
#include "revrir/nn/optim.hpp"

namespace revrir::joint {

/// Precomputed encoder inputs for one split: item i pairs a reverberant clip
/// with an RIR of the same room class.
struct PairedFeatures {
  std::vector<std::vector<double>> speech;
  std::vector<std::vector<double>> rir;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

enum class BatchSampler {
  /// Shuffle per epoch and cut into consecutive batches, class-agnostic.
  Uniform,
  /// Every batch holds items from pairwise-distinct classes.
  DistinctClass,
};

struct PretrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double warmup_ratio = 0.05;
  double weight_decay = 0.01;
  BatchSampler sampler = BatchSampler::Uniform;
  std::uint64_t seed = 0;
  /// Stops after this many optimizer steps when non-zero.
  std::size_t max_steps = 0;
};

struct LossPoint {
  std::size_t step = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
};

struct PretrainResult {
  std::vector<LossPoint> curve;
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;  // mean over the last epoch
  std::size_t steps = 0;
};

/// Both towers plus the temperature.
struct DualEncoder {
  SpeechEncoder speech;
  RirEncoder rir;
  Temperature temperature;

  DualEncoder(const SpeechEncoderConfig& speech_config, const RirEncoderConfig& rir_config,
              double initial_tau, std::uint64_t seed);

  void set_training(bool training);
  std::vector<nn::NamedTensor> encoder_parameters() const;
};

/// Batches for one epoch, as index lists into a split of `labels.size()`
/// items. Incomplete trailing batches are dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::span<const int> labels,
                                                    std::size_t batch_size,
                                                    BatchSampler sampler, Rng& rng);

/// Loss of the current model on one batch of items (no parameter update).
double batch_loss(DualEncoder& model, const PairedFeatures& data,
                  std::span<const std::size_t> items);

/// Mean eval-mode loss over fixed, seeded batches of the split.
double evaluate_loss(DualEncoder& model, const PairedFeatures& data, std::size_t batch_size,
                     std::uint64_t seed);

/// Minibatch AdamW on the contrastive objective with a linear warmup/decay
/// schedule; the temperature is clamped to (0, 1] after every step.
PretrainResult pretrain(DualEncoder& model, const PairedFeatures& train,
                        const PairedFeatures& val, const PretrainConfig& config);

}  // namespace revrir::joint
