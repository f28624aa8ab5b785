#pragma once

// Hand-crafted RIR descriptors and the small MLP classifier trained on them.
//
// Feature layout (30 values). For each band k = 1..5, spanning
// [50k, 200k] Hz, five entries at index 5(k-1) + j:
//   j=0  decay rate of the band-limited RIR in dB/s: least-squares slope of
//        the Schroeder energy decay curve between -5 and -25 dB
//   j=1  fraction of the total spectral energy |H|^2 inside the band
//   j=2  kurtosis E[(a-mean)^4] / var^2 of the magnitudes a = |H| in the band
//   j=3  standard deviation of 20 log10 |H| across the band bins
//   j=4  number of local maxima of 20 log10 |H| above the band's mean dB
// then five time-domain entries at 25..29:
//   25  early-reflection density: local maxima of |h| within 50 ms after the
//       direct path (the global peak) that lie within 40 dB of that peak
//   26  direct-to-reverberant ratio in dB, direct window = peak +- 2.5 ms
//   27  full-band Schroeder decay rate in dB/s (same fit as j=0)
//   28  sample kurtosis of h
//   29  temporal centroid sum(t h^2) / sum(h^2) in seconds
//
// Every feature is invariant to a positive gain on h: ratios, kurtoses, dB
// differences and counts relative to the peak all cancel the scale.
//
// Spectra use an FFT of the RIR length rounded up to a power of two; band
// filtering for the decay rates zeroes the bins outside the band.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "revrir/matrix.hpp"
#include "revrir/nn/layers.hpp"
#include "revrir/simulate.hpp"

namespace revrir::tasks {

inline constexpr std::size_t kBaselineFeatureCount = 30;
inline constexpr int kBaselineBands = 5;

using RirFeatureVector = std::array<double, kBaselineFeatureCount>;

struct Band {
  double lo_hz;
  double hi_hz;
};

/// Band k in 1..5: [50k, 200k] Hz.
Band baseline_band(int k);

std::vector<std::string> baseline_feature_names();

/// Slope in dB/s of the Schroeder curve fitted between -5 and -25 dB.
double schroeder_decay_rate(std::span<const double> h, double sample_rate);

RirFeatureVector baseline_features(const sim::Rir& rir);

/// Features of every RIR; a non-finite entry raises a data error naming the
/// RIR's position. Parallel over `jobs` threads with identical output.
Matrix baseline_feature_matrix(std::span<const sim::Rir> rirs, int jobs = 1);

struct BaselineConfig {
  /// Interior widths at the reference catalog size; see baseline_widths.
  std::vector<std::size_t> reference_widths = {65, 90, 100};
  std::size_t reference_classes = 110;
  double dropout = 0.2;
  double lr = 1e-3;
  double warmup_ratio = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
};

/// Interior widths for M classes: ceil(w * M / reference), widened to
/// min(M, w) so small catalogs are not squeezed below one unit per class.
/// At the reference size this returns reference_widths unchanged.
std::vector<std::size_t> baseline_widths(std::size_t classes, const BaselineConfig& config);

/// Standardization -> [Linear -> ReLU -> Dropout] x interior -> Linear.
class BaselineClassifier : public nn::Module {
 public:
  BaselineClassifier(std::size_t classes, const BaselineConfig& config);

  /// Sets the standardization statistics from training features.
  void fit_standardizer(const Matrix& features);
  nn::Tensor forward(const Matrix& features);
  std::vector<int> predict(const Matrix& features);
  void collect(const std::string& prefix, std::vector<nn::NamedTensor>& params,
               std::vector<nn::NamedTensor>& buffers) const override;
  std::size_t classes() const { return layers_.back().out_features(); }

 private:
  std::vector<nn::Linear> layers_;
  nn::Dropout dropout_;
  nn::Tensor mean_;
  nn::Tensor inv_std_;
};

struct BaselineResult {
  std::vector<double> epoch_losses;
  std::vector<int> predictions;
  double accuracy = 0.0;
};

BaselineResult baseline_train_eval(BaselineClassifier& model, const Matrix& train_features,
                                   std::span<const int> train_labels,
                                   const Matrix& val_features, std::span<const int> val_labels,
                                   const BaselineConfig& config);

}  // namespace revrir::tasks
