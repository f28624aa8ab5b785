#pragma once

// Image-source simulation of shoebox room impulse responses.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "revrir/catalog.hpp"
#include "revrir/rng.hpp"

namespace revrir::sim {

using Vec3 = std::array<double, 3>;

/// Per-facet amplitude reflection factors: x=0, x=W, y=0, y=D, z=0, z=H.
using Reflection = std::array<double, 6>;

inline Reflection uniform_reflection(double beta) {
  return {beta, beta, beta, beta, beta, beta};
}

struct AcousticConfig {
  double speed_of_sound = 343.0;
  double sample_rate = 8000.0;
  double beta_min = 0.88;
  double beta_max = 0.9;
  std::size_t rir_length = 4096;
  double min_wall_distance = 0.5;
  double min_src_mic_distance = 0.5;
  /// Negative means "auto": every image whose arrival lands in the buffer.
  int max_image_order = -1;
  int max_placement_attempts = 10000;

  void validate() const;
};

struct Placement {
  Vec3 source{};
  Vec3 microphone{};

  double separation() const;
  friend auto operator<=>(const Placement&, const Placement&) = default;
};

struct Rir {
  std::vector<double> samples;
  double sample_rate = 8000.0;
  int class_id = 0;
  Placement placement;
  Reflection beta{};
};

/// Half-width of the fractional-delay kernel; the kernel spans 2*40+1 taps.
inline constexpr int kKernelHalfWidth = 40;

/// Hann-windowed sinc evaluated `t` samples from the arrival instant. Zero
/// outside |t| <= kKernelHalfWidth.
double fractional_delay_tap(double t);

/// Adds `amplitude` delayed by `delay_samples` (fractional) into `out` using
/// the windowed-sinc kernel. Taps falling outside `out` are dropped.
void add_arrival(std::vector<double>& out, double delay_samples, double amplitude);

void validate_placement(const catalog::RoomSpec& room, const Placement& placement,
                        const AcousticConfig& config);

/// Rejection sampling, uniform over the admissible source/microphone pairs.
Placement sample_placement(const catalog::RoomSpec& room, Rng& rng,
                           const AcousticConfig& config);

Rir generate_rir(const catalog::RoomSpec& room, const Placement& placement,
                 const Reflection& beta, const AcousticConfig& config);

/// `per_class_count` RIRs per class, each with its own placement and beta
/// drawn from a seed derived from (seed, class, index). Within each class
/// the result is in canonical order (see canonical_less). `jobs` > 1 splits
/// the work across threads without changing the result.
std::vector<Rir> generate_rir_bank(const catalog::Catalog& catalog, int per_class_count,
                                   std::uint64_t seed, const AcousticConfig& config,
                                   int jobs = 1);

/// Orders by class, then placement, then beta.
bool canonical_less(const Rir& a, const Rir& b);
void canonicalize(std::vector<Rir>& bank);

// Bank container, little-endian:
//   "RVRB" u32 version=1, u32 sample_rate, u32 rir_length, u64 count,
//   16 bytes producing config hash (ASCII hex)
//   count x { i32 class_id, 6 x f64 placement (src xyz, mic xyz),
//             f64 beta, rir_length x f32 samples }
struct RirBank {
  std::string config_hash;
  std::vector<Rir> rirs;
};

void write_rir_bank(std::ostream& out, const RirBank& bank);
RirBank read_rir_bank(std::istream& in);
void save_rir_bank(const std::string& path, const RirBank& bank);
RirBank load_rir_bank(const std::string& path);

}  // namespace revrir::sim
