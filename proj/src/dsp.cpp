#include "revrir/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "revrir/error.hpp"

namespace revrir::dsp {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  require(is_power_of_two(n), ErrorKind::Validation, "FFT size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by recurrence to keep
    // round-off at the 1e-15 level for large n.
    std::vector<Complex> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(len);
      tw[k] = {std::cos(a), std::sin(a)};
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = data[i + k];
        const Complex v = data[i + k + half] * tw[k];
        data[i + k] = u + v;
        data[i + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : data) v *= scale;
  }
}

std::vector<Complex> fft_real(std::span<const double> x, std::size_t n) {
  require(is_power_of_two(n), ErrorKind::Validation, "FFT size must be a power of two");
  require(x.size() <= n, ErrorKind::Validation, "FFT size shorter than the input");
  std::vector<Complex> buf(n);
  std::copy(x.begin(), x.end(), buf.begin());
  fft_inplace(buf, false);
  buf.resize(n / 2 + 1);
  return buf;
}

std::vector<double> ifft_real(std::span<const Complex> half_spectrum, std::size_t n) {
  require(is_power_of_two(n) && half_spectrum.size() == n / 2 + 1, ErrorKind::Validation,
          "half spectrum does not match the transform size");
  std::vector<Complex> buf(n);
  std::copy(half_spectrum.begin(), half_spectrum.end(), buf.begin());
  for (std::size_t k = n / 2 + 1; k < n; ++k) buf[k] = std::conj(half_spectrum[n - k]);
  fft_inplace(buf, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

std::vector<double> convolve(std::span<const double> s, std::span<const double> h) {
  require(!s.empty() && !h.empty(), ErrorKind::Validation, "convolution of an empty signal");
  const std::size_t out_len = s.size() + h.size() - 1;
  const std::size_t n = next_power_of_two(out_len);
  // Pack both real inputs into one complex transform: z = s + i h.
  std::vector<Complex> z(n);
  for (std::size_t i = 0; i < s.size(); ++i) z[i].real(s[i]);
  for (std::size_t i = 0; i < h.size(); ++i) z[i].imag(h[i]);
  fft_inplace(z, false);
  std::vector<Complex> prod(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Complex zk = z[k];
    const Complex zc = std::conj(z[(n - k) % n]);
    const Complex sk = 0.5 * (zk + zc);
    const Complex hk = Complex(0, -0.5) * (zk - zc);
    prod[k] = sk * hk;
  }
  fft_inplace(prod, true);
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = prod[i].real();
  return out;
}

Signal convolve(const Signal& s, const Signal& h) {
  require(s.sample_rate == h.sample_rate, ErrorKind::Validation,
          "convolution operands have different sample rates");
  return {convolve(std::span<const double>(s.samples), std::span<const double>(h.samples)),
          s.sample_rate};
}

std::vector<double> log_mag_spectrum(std::span<const double> h, std::size_t n, double floor_db) {
  const auto spec = fft_real(h, n);
  std::vector<double> out(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double mag = std::abs(spec[k]);
    out[k] = mag > 0 ? std::max(20.0 * std::log10(mag), floor_db) : floor_db;
  }
  return out;
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

Spectrogram spectrogram(const Signal& x, std::size_t frame_length, std::size_t hop,
                        double floor_db) {
  require(is_power_of_two(frame_length), ErrorKind::Validation,
          "frame length must be a power of two");
  require(hop >= 1, ErrorKind::Validation, "hop must be at least one sample");
  require(x.samples.size() >= frame_length, ErrorKind::Validation,
          "signal shorter than one spectrogram frame");
  Spectrogram out;
  out.frame_length = frame_length;
  out.hop = hop;
  out.sample_rate = x.sample_rate;
  out.frames = 1 + (x.samples.size() - frame_length) / hop;
  out.bins = frame_length / 2 + 1;
  out.values.resize(out.frames * out.bins);
  const auto window = hann_window(frame_length);
  std::vector<Complex> buf(frame_length);
  for (std::size_t f = 0; f < out.frames; ++f) {
    const double* src = x.samples.data() + f * hop;
    for (std::size_t i = 0; i < frame_length; ++i) buf[i] = src[i] * window[i];
    fft_inplace(buf, false);
    for (std::size_t k = 0; k < out.bins; ++k) {
      const double mag = std::abs(buf[k]);
      out.values[f * out.bins + k] =
          mag > 0 ? std::max(20.0 * std::log10(mag), floor_db) : floor_db;
    }
  }
  return out;
}

}  // namespace revrir::dsp
