#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "revrir/dsp.hpp"
#include "revrir/error.hpp"
#include "revrir/rng.hpp"

using namespace revrir;
using namespace revrir::dsp;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST(Dsp, PowerOfTwoHelpers) {
  EXPECT_TRUE(is_power_of_two(1));
  EXPECT_TRUE(is_power_of_two(4096));
  EXPECT_FALSE(is_power_of_two(0));
  EXPECT_FALSE(is_power_of_two(48));
  EXPECT_EQ(next_power_of_two(1), 1u);
  EXPECT_EQ(next_power_of_two(33), 64u);
  EXPECT_EQ(next_power_of_two(64), 64u);
}

TEST(Dsp, FftMatchesNaiveDft) {
  for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 32u, 64u}) {
    Rng rng(n);
    std::vector<Complex> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    const auto want = oracle::dft(x);
    auto got = x;
    fft_inplace(got, false);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(got[k] - want[k]), 1e-9) << n << " " << k;
    fft_inplace(got, true);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(got[k] - x[k]), 1e-12);
  }
}

TEST(Dsp, FftRejectsNonPowerOfTwo) {
  std::vector<Complex> x(12);
  EXPECT_THROW(fft_inplace(x, false), Error);
}

TEST(Dsp, RealFftRoundTrip) {
  const auto x = noise(50, 3);
  const auto half = fft_real(x, 64);
  ASSERT_EQ(half.size(), 33u);
  std::vector<std::complex<double>> padded(64);
  for (std::size_t i = 0; i < x.size(); ++i) padded[i] = x[i];
  const auto want = oracle::dft(padded);
  for (std::size_t k = 0; k < half.size(); ++k) EXPECT_LT(std::abs(half[k] - want[k]), 1e-9);
  const auto back = ifft_real(half, 64);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(back[i], i < 50 ? x[i] : 0.0, 1e-12);
}

TEST(Dsp, ConvolutionMatchesDirectSum) {
  for (auto [ns, nh] : {std::pair<std::size_t, std::size_t>{1, 1}, {7, 3}, {100, 513}, {1024, 1024}}) {
    const auto s = noise(ns, ns);
    const auto h = noise(nh, nh + 1);
    const auto want = oracle::direct_convolution(s, h);
    const auto got = convolve(s, h);
    ASSERT_EQ(got.size(), want.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    EXPECT_LT(worst, 1e-9) << ns << "x" << nh;
  }
}

TEST(Dsp, ConvolutionWithDeltaIsIdentity) {
  const auto s = noise(300, 11);
  const auto y = convolve(s, std::vector<double>{1.0});
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(y[i], s[i], 1e-12);
}

TEST(Dsp, SignalConvolutionChecksRates) {
  Signal a{{1.0, 2.0}, 8000.0};
  Signal b{{1.0}, 16000.0};
  EXPECT_THROW(convolve(a, b), Error);
  EXPECT_EQ(convolve(a, Signal{{0.5}, 8000.0}).samples, (std::vector<double>{0.5, 1.0}));
}

TEST(Dsp, LogMagnitudeOfDeltaIsFlatZero) {
  std::vector<double> h(64, 0.0);
  h[5] = 1.0;
  const auto s = log_mag_spectrum(h, 64);
  ASSERT_EQ(s.size(), 33u);
  for (double v : s) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Dsp, LogMagnitudeIsFloored) {
  const auto s = log_mag_spectrum(std::vector<double>(16, 0.0), 16, -90.0);
  for (double v : s) EXPECT_EQ(v, -90.0);
}

TEST(Dsp, HannWindowIsPeriodic) {
  const auto w = hann_window(8);
  EXPECT_NEAR(w[0], 0.0, 1e-15);
  EXPECT_NEAR(w[4], 1.0, 1e-15);
  EXPECT_NEAR(w[2], 0.5, 1e-15);
  EXPECT_NEAR(w[1], w[7], 1e-15);
}

TEST(Dsp, SpectrogramShapeAndTone) {
  Signal x;
  x.sample_rate = 8000.0;
  for (int n = 0; n < 8000; ++n) x.samples.push_back(std::sin(2.0 * oracle::kPi * 1000.0 * n / 8000.0));
  const auto sg = spectrogram(x, 256, 128);
  EXPECT_EQ(sg.bins, 129u);
  EXPECT_EQ(sg.frames, 1u + (8000u - 256u) / 128u);
  ASSERT_EQ(sg.values.size(), sg.frames * sg.bins);
  for (std::size_t f = 0; f < sg.frames; ++f) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < sg.bins; ++b) {
      if (sg.at(f, b) > sg.at(f, best)) best = b;
    }
    EXPECT_EQ(best, 32u);  // 1000 Hz / (8000/256)
  }
}

TEST(Dsp, SpectrogramRejectsShortInput) {
  Signal x{std::vector<double>(100, 0.1), 8000.0};
  EXPECT_THROW(spectrogram(x, 256, 128), Error);
}
