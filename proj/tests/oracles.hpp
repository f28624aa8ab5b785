#pragma once

// Reference implementations used only by the tests. Each one is written
// from the defining formula, favouring obviousness over speed, and shares no
// code with the library routine it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <tuple>
#include <vector>

namespace oracle {

constexpr double kPi = std::numbers::pi;

/// O(n^2) DFT: X_k = sum_t x_t exp(-2 pi i k t / n).
inline std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

/// y[n] = sum_k s[k] h[n-k], full length.
inline std::vector<double> direct_convolution(const std::vector<double>& s,
                                              const std::vector<double>& h) {
  std::vector<double> y(s.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += s[i] * h[j];
  }
  return y;
}

/// Hann-windowed sinc with 40-sample half-width.
inline double windowed_sinc(double t) {
  if (std::abs(t) > 40.0) return 0.0;
  const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
  return sinc * 0.5 * (1.0 + std::cos(kPi * t / 40.0));
}

struct Image {
  std::array<double, 3> position;
  double gain;
  int order;
};

/// Mirror images of `src` by repeated reflection across the six wall
/// planes, up to `max_order` reflections. `beta` is ordered x=0, x=L,
/// y=0, y=L, z=0, z=L. Images reached by several reflection orders are
/// kept once.
inline std::vector<Image> brute_force_images(const std::array<double, 3>& dims,
                                             const std::array<double, 3>& src,
                                             const std::array<double, 6>& beta, int max_order) {
  std::map<std::tuple<long, long, long>, Image> seen;
  auto key = [](const std::array<double, 3>& p) {
    return std::make_tuple(std::lround(p[0] * 1e6), std::lround(p[1] * 1e6),
                           std::lround(p[2] * 1e6));
  };
  std::function<void(const Image&, int)> expand = [&](const Image& img, int last_wall) {
    seen.emplace(key(img.position), img);
    if (img.order == max_order) return;
    for (int wall = 0; wall < 6; ++wall) {
      if (wall == last_wall) continue;  // reflecting back gives the parent
      const int axis = wall / 2;
      Image next = img;
      const double plane = (wall % 2 == 0) ? 0.0 : dims[axis];
      next.position[axis] = 2.0 * plane - img.position[axis];
      next.gain *= beta[wall];
      next.order += 1;
      expand(next, wall);
    }
  };
  expand({src, 1.0, 0}, -1);
  std::vector<Image> out;
  for (auto& [k, img] : seen) out.push_back(img);
  return out;
}

inline std::vector<double> brute_force_rir(const std::array<double, 3>& dims,
                                           const std::array<double, 3>& src,
                                           const std::array<double, 3>& mic,
                                           const std::array<double, 6>& beta, int max_order,
                                           double fs, double c, std::size_t length) {
  std::vector<double> h(length, 0.0);
  for (const Image& img : brute_force_images(dims, src, beta, max_order)) {
    const double d = std::hypot(img.position[0] - mic[0], img.position[1] - mic[1],
                                img.position[2] - mic[2]);
    const double delay = fs * d / c;
    const double amp = img.gain / (4.0 * kPi * d);
    for (std::size_t n = 0; n < length; ++n) {
      const double t = static_cast<double>(n) - delay;
      if (std::abs(t) <= 40.0) h[n] += amp * windowed_sinc(t);
    }
  }
  return h;
}

/// Symmetric InfoNCE with diagonal positives, computed in long double.
inline double info_nce(const std::vector<std::vector<double>>& e1,
                       const std::vector<std::vector<double>>& e2, double tau) {
  const std::size_t b = e1.size();
  auto sim = [&](std::size_t i, std::size_t j) {
    long double s = 0;
    for (std::size_t k = 0; k < e1[i].size(); ++k) s += e1[i][k] * e2[j][k];
    return s / tau;
  };
  long double forward = 0, backward = 0;
  for (std::size_t i = 0; i < b; ++i) {
    long double row = 0, col = 0;
    for (std::size_t j = 0; j < b; ++j) {
      row += std::exp(sim(i, j));
      col += std::exp(sim(j, i));
    }
    forward += -(sim(i, i) - std::log(row));
    backward += -(sim(i, i) - std::log(col));
  }
  return static_cast<double>((forward + backward) / (2.0L * b));
}

/// Central difference of f with respect to x[i].
inline double central_difference(std::vector<double>& x, std::size_t i,
                                 const std::function<double()>& f, double h = 1e-5) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace oracle
