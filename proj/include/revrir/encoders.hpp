#pragma once

// The two towers of the joint embedding and their featurization.
//
// RirEncoder maps the log-magnitude spectrum of an RIR through a stack of
// Linear -> ReLU -> BatchNorm blocks. SpeechEncoder is a compact spectrogram
// encoder (per-frame projection, ReLU, mean over frames, two feed-forward
// blocks). Both end at the shared embedding dimension and are followed by
// L2 normalization.

#include <cstdint>
#include <span>
#include <vector>

#include "revrir/dsp.hpp"
#include "revrir/matrix.hpp"
#include "revrir/nn/layers.hpp"
#include "revrir/simulate.hpp"

namespace revrir::joint {

/// Fixed gain applied to dB-valued encoder inputs (dB / 20, i.e. log10 of
/// the magnitude) so first-layer activations start at unit scale.
inline constexpr double kInputScale = 1.0 / 20.0;

struct FeatureConfig {
  std::size_t rir_fft_size = 4096;
  std::size_t frame_length = 1024;
  std::size_t hop = 512;
  double floor_db = dsp::kDefaultFloorDb;
  double sample_rate = 8000.0;
  double max_clip_seconds = 10.0;

  std::size_t rir_bins() const { return rir_fft_size / 2 + 1; }
  std::size_t speech_bins() const { return frame_length / 2 + 1; }
};

/// 20 log10 |FFT(h)| over rir_fft_size points. RIR length must equal the
/// transform size.
std::vector<double> rir_features(const sim::Rir& rir, const FeatureConfig& config);

/// Flattened frames x bins spectrogram in dB.
std::vector<double> speech_features(const dsp::Signal& x, const FeatureConfig& config);

/// Anything that maps a batch of flattened feature vectors to raw (not yet
/// normalized) d-dimensional rows.
class Encoder : public nn::Module {
 public:
  virtual nn::Tensor forward(std::span<const std::vector<double>* const> items) = 0;
  virtual std::size_t embedding_dim() const = 0;

  /// forward followed by row L2 normalization.
  nn::Tensor embed(std::span<const std::vector<double>* const> items);
};

struct RirEncoderConfig {
  std::size_t input_bins = 2049;
  std::vector<std::size_t> dims = {256, 192, 128, 32};
};

class RirEncoder : public Encoder {
 public:
  RirEncoder(const RirEncoderConfig& config, Rng& rng);

  nn::Tensor forward(std::span<const std::vector<double>* const> items) override;
  std::size_t embedding_dim() const override { return config_.dims.back(); }
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
               std::vector<nn::NamedTensor>& buffers) const override;
  void set_training(bool training) override;

  const RirEncoderConfig& config() const { return config_; }

 private:
  RirEncoderConfig config_;
  std::vector<nn::FeedForwardBlock> blocks_;
};

struct SpeechEncoderConfig {
  std::size_t input_bins = 513;
  std::size_t frame_dim = 128;
  std::vector<std::size_t> dims = {64, 32};
};

class SpeechEncoder : public Encoder {
 public:
  SpeechEncoder(const SpeechEncoderConfig& config, Rng& rng);

  /// Items are flattened frames x input_bins spectrograms with equal frame
  /// counts.
  nn::Tensor forward(std::span<const std::vector<double>* const> items) override;
  std::size_t embedding_dim() const override { return config_.dims.back(); }
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
               std::vector<nn::NamedTensor>& buffers) const override;
  void set_training(bool training) override;

  const SpeechEncoderConfig& config() const { return config_; }

 private:
  SpeechEncoderConfig config_;
  nn::Linear frame_projection_;
  std::vector<nn::FeedForwardBlock> blocks_;
};

/// Trainable temperature stored as log(tau); clamp() keeps tau in (0, 1].
class Temperature : public nn::Module {
 public:
  explicit Temperature(double initial = 0.07);

  double value() const;
  const nn::Tensor& log_tau() const { return log_tau_; }
  void clamp();
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
               std::vector<nn::NamedTensor>& buffers) const override;

 private:
  nn::Tensor log_tau_;
};

/// Runs `fn` with the module in eval mode and restores the previous mode.
template <typename Fn>
auto with_eval_mode(nn::Module& module, Fn&& fn) {
  struct Restore {
    nn::Module& m;
    bool was;
    ~Restore() { m.set_training(was); }
  } restore{module, module.training()};
  module.set_training(false);
  return fn();
}

/// Unit-norm embedding of one RIR in eval mode.
std::vector<double> encode_rir(const sim::Rir& rir, RirEncoder& encoder,
                               const FeatureConfig& config);

/// Unit-norm embedding of one reverberant clip in eval mode.
std::vector<double> encode_speech(const dsp::Signal& x, SpeechEncoder& encoder,
                                  const FeatureConfig& config);

/// Eval-mode unit-norm embeddings of precomputed features, in chunks.
Matrix embed_all(Encoder& encoder, std::span<const std::vector<double>> features,
                 std::size_t chunk = 64);

}  // namespace revrir::joint
