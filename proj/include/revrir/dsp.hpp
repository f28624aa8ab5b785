#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace revrir::dsp {

using Complex = std::complex<double>;

inline constexpr double kDefaultFloorDb = -120.0;

struct Signal {
  std::vector<double> samples;
  double sample_rate = 8000.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Row-major frames x bins, values in dB.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t frame_length = 0;
  std::size_t hop = 0;
  double sample_rate = 0.0;
  std::vector<double> values;

  double at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 transform; `inverse` applies the 1/n scale.
void fft_inplace(std::span<Complex> data, bool inverse);

/// DFT of x zero-padded to n; returns the n/2+1 non-negative-frequency bins.
std::vector<Complex> fft_real(std::span<const double> x, std::size_t n);

/// Inverse of fft_real: n real samples from n/2+1 half-spectrum bins.
std::vector<double> ifft_real(std::span<const Complex> half_spectrum, std::size_t n);

/// Full linear convolution (length len(s)+len(h)-1) via FFT.
Signal convolve(const Signal& s, const Signal& h);
std::vector<double> convolve(std::span<const double> s, std::span<const double> h);

/// 20*log10|FFT_n(h)| per bin, clamped below at floor_db; n/2+1 values.
std::vector<double> log_mag_spectrum(std::span<const double> h, std::size_t n,
                                     double floor_db = kDefaultFloorDb);

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t length);

/// Hann-windowed framed log-magnitude STFT in dB.
Spectrogram spectrogram(const Signal& x, std::size_t frame_length, std::size_t hop,
                        double floor_db = kDefaultFloorDb);

}  // namespace revrir::dsp
