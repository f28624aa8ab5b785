#include "revrir/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "revrir/error.hpp"

namespace revrir::joint {

std::vector<double> rir_features(const sim::Rir& rir, const FeatureConfig& config) {
  require(rir.samples.size() == config.rir_fft_size, ErrorKind::Validation,
          "RIR length " + std::to_string(rir.samples.size()) +
              " does not match the encoder transform size " +
              std::to_string(config.rir_fft_size));
  return dsp::log_mag_spectrum(rir.samples, config.rir_fft_size, config.floor_db);
}

std::vector<double> speech_features(const dsp::Signal& x, const FeatureConfig& config) {
  require(x.sample_rate == config.sample_rate, ErrorKind::Validation,
          "clip sample rate does not match the encoder configuration");
  require(x.duration() <= config.max_clip_seconds + 1e-9, ErrorKind::Validation,
          "clip longer than the maximum duration");
  return dsp::spectrogram(x, config.frame_length, config.hop, config.floor_db).values;
}

nn::Tensor Encoder::embed(std::span<const std::vector<double>* const> items) {
  return nn::l2_normalize_rows(forward(items));
}

namespace {

nn::Tensor stack_scaled(std::span<const std::vector<double>* const> items, std::size_t width,
                        std::size_t rows_per_item) {
  require(!items.empty(), ErrorKind::Validation, "empty encoder batch");
  const std::size_t per = width * rows_per_item;
  std::vector<double> values;
  values.reserve(items.size() * per);
  for (const auto* item : items) {
    require(item->size() == per, ErrorKind::Validation,
            "encoder input has " + std::to_string(item->size()) + " values, expected " +
                std::to_string(per));
    for (double v : *item) values.push_back(v * kInputScale);
  }
  return nn::Tensor({items.size() * rows_per_item, width}, std::move(values));
}

}  // namespace

RirEncoder::RirEncoder(const RirEncoderConfig& config, Rng& rng) : config_(config) {
  require(!config.dims.empty() && config.input_bins > 0, ErrorKind::Validation,
          "RIR encoder needs an input size and at least one block");
  std::size_t in = config.input_bins;
  for (std::size_t out : config.dims) {
    blocks_.emplace_back(in, out, rng);
    in = out;
  }
}

nn::Tensor RirEncoder::forward(std::span<const std::vector<double>* const> items) {
  nn::Tensor x = stack_scaled(items, config_.input_bins, 1);
  for (auto& block : blocks_) x = block.forward(x);
  return x;
}

void RirEncoder::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
                         std::vector<nn::NamedTensor>& buffers) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(prefix + "block" + std::to_string(i) + ".", params, buffers);
  }
}

void RirEncoder::set_training(bool training) {
  Module::set_training(training);
  for (auto& b : blocks_) b.set_training(training);
}

SpeechEncoder::SpeechEncoder(const SpeechEncoderConfig& config, Rng& rng)
    : config_(config), frame_projection_(config.input_bins, config.frame_dim, rng) {
  require(!config.dims.empty(), ErrorKind::Validation, "speech encoder needs output blocks");
  std::size_t in = config.frame_dim;
  for (std::size_t out : config.dims) {
    blocks_.emplace_back(in, out, rng);
    in = out;
  }
}

nn::Tensor SpeechEncoder::forward(std::span<const std::vector<double>* const> items) {
  require(!items.empty(), ErrorKind::Validation, "empty encoder batch");
  const std::size_t bins = config_.input_bins;
  require(items.front()->size() % bins == 0 && !items.front()->empty(), ErrorKind::Validation,
          "spectrogram size is not a multiple of the bin count");
  const std::size_t frames = items.front()->size() / bins;
  nn::Tensor x = stack_scaled(items, bins, frames);
  x = nn::relu(frame_projection_.forward(x));
  x = nn::mean_pool_rows(x, items.size());
  for (auto& block : blocks_) x = block.forward(x);
  return x;
}

void SpeechEncoder::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
                            std::vector<nn::NamedTensor>& buffers) const {
  frame_projection_.collect(prefix + "frame.", params, buffers);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(prefix + "block" + std::to_string(i) + ".", params, buffers);
  }
}

void SpeechEncoder::set_training(bool training) {
  Module::set_training(training);
  frame_projection_.set_training(training);
  for (auto& b : blocks_) b.set_training(training);
}

Temperature::Temperature(double initial) {
  require(initial > 0 && initial <= 1, ErrorKind::Validation,
          "initial temperature must lie in (0, 1]");
  log_tau_ = nn::Tensor::scalar(std::log(initial), true);
}

double Temperature::value() const { return std::exp(log_tau_.item()); }

void Temperature::clamp() {
  auto v = log_tau_.mutable_values();
  v[0] = std::min(v[0], 0.0);
}

void Temperature::collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
                          std::vector<nn::NamedTensor>&) const {
  params.push_back({prefix + "log_tau", log_tau_});
}

std::vector<double> encode_rir(const sim::Rir& rir, RirEncoder& encoder,
                               const FeatureConfig& config) {
  require(config.rir_bins() == encoder.config().input_bins, ErrorKind::Validation,
          "feature bins do not match the RIR encoder input");
  const auto feats = rir_features(rir, config);
  const std::vector<double>* item = &feats;
  const nn::Tensor e = with_eval_mode(encoder, [&] {
    return encoder.embed(std::span<const std::vector<double>* const>(&item, 1));
  });
  return {e.values().begin(), e.values().end()};
}

std::vector<double> encode_speech(const dsp::Signal& x, SpeechEncoder& encoder,
                                  const FeatureConfig& config) {
  const auto feats = speech_features(x, config);
  const std::vector<double>* item = &feats;
  const nn::Tensor e = with_eval_mode(encoder, [&] {
    return encoder.embed(std::span<const std::vector<double>* const>(&item, 1));
  });
  return {e.values().begin(), e.values().end()};
}

Matrix embed_all(Encoder& encoder, std::span<const std::vector<double>> features,
                 std::size_t chunk) {
  Matrix out(features.size(), encoder.embedding_dim());
  with_eval_mode(encoder, [&] {
    for (std::size_t start = 0; start < features.size(); start += chunk) {
      const std::size_t end = std::min(features.size(), start + chunk);
      std::vector<const std::vector<double>*> items;
      for (std::size_t i = start; i < end; ++i) items.push_back(&features[i]);
      const nn::Tensor e = encoder.embed(items);
      std::copy(e.values().begin(), e.values().end(), out.data.begin() + start * out.cols);
    }
    return 0;
  });
  return out;
}

}  // namespace revrir::joint
