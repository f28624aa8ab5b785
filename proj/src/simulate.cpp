#include "revrir/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <thread>

#include "revrir/binary_io.hpp"
#include "revrir/error.hpp"

namespace revrir::sim {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kTaps = 2 * kKernelHalfWidth + 1;

struct KernelTables {
  // Half-window terms with the alternating sign -(-1)^k folded in.
  std::array<double, kTaps> base{};   // s_k / 2
  std::array<double, kTaps> cos_k{};  // s_k cos(pi k / H) / 2
  std::array<double, kTaps> sin_k{};  // s_k sin(pi k / H) / 2
  std::array<double, kTaps> k{};
  KernelTables() {
    for (int i = 0; i < kTaps; ++i) {
      const int kk = i - kKernelHalfWidth;
      const double a = kPi * kk / kKernelHalfWidth;
      const double sign = (kk % 2 == 0) ? -1.0 : 1.0;
      base[i] = 0.5 * sign;
      cos_k[i] = 0.5 * sign * std::cos(a);
      sin_k[i] = 0.5 * sign * std::sin(a);
      k[i] = kk;
    }
  }
};

const KernelTables& tables() {
  static const KernelTables t;
  return t;
}

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 dims_of(const catalog::RoomSpec& room) {
  return {room.width.meters(), room.depth.meters(), room.height.meters()};
}

}  // namespace

void AcousticConfig::validate() const {
  require(speed_of_sound > 0, ErrorKind::Validation, "speed of sound must be positive");
  require(sample_rate > 0, ErrorKind::Validation, "sample rate must be positive");
  require(beta_min >= 0 && beta_max < 1 && beta_min <= beta_max, ErrorKind::Validation,
          "reflection coefficient range must lie in [0, 1)");
  require(rir_length > 0, ErrorKind::Validation, "rir length must be positive");
  require(min_wall_distance >= 0 && min_src_mic_distance >= 0, ErrorKind::Validation,
          "placement distances must be non-negative");
  require(max_placement_attempts > 0, ErrorKind::Validation,
          "placement attempt budget must be positive");
}

double Placement::separation() const {
  return norm3({source[0] - microphone[0], source[1] - microphone[1],
                source[2] - microphone[2]});
}

double fractional_delay_tap(double t) {
  if (std::abs(t) > kKernelHalfWidth) return 0.0;
  const double window = 0.5 * (1.0 + std::cos(kPi * t / kKernelHalfWidth));
  const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
  return window * sinc;
}

void add_arrival(std::vector<double>& out, double delay_samples, double amplitude) {
  const double center_f = std::floor(delay_samples);
  const double frac = delay_samples - center_f;
  const auto center = static_cast<long>(center_f);
  const long n = static_cast<long>(out.size());
  if (center + kKernelHalfWidth < 0 || center - kKernelHalfWidth >= n) return;
  if (frac == 0.0) {
    if (center >= 0 && center < n) out[static_cast<std::size_t>(center)] += amplitude;
    return;
  }
  // t = k - frac, so sin(pi t) = -(-1)^k sin(pi frac) and the window cosine
  // splits into tabulated k terms and one frac term.
  const KernelTables& tab = tables();
  const double sin_pf = std::sin(kPi * frac);
  const double cw = std::cos(kPi * frac / kKernelHalfWidth);
  const double sw = std::sin(kPi * frac / kKernelHalfWidth);
  const long k_lo = std::max<long>(-kKernelHalfWidth + 1, -center);
  const long k_hi = std::min<long>(kKernelHalfWidth, n - 1 - center);
  const double scale = amplitude * sin_pf / kPi;
  const auto i_lo = static_cast<std::size_t>(k_lo + kKernelHalfWidth);
  const auto i_hi = static_cast<std::size_t>(k_hi + kKernelHalfWidth);
  double* dst = out.data() + (center + k_lo);
  for (std::size_t i = i_lo; i <= i_hi; ++i) {
    dst[i - i_lo] += scale * (tab.base[i] + tab.cos_k[i] * cw + tab.sin_k[i] * sw) / (tab.k[i] - frac);
  }
}

void validate_placement(const catalog::RoomSpec& room, const Placement& placement,
                        const AcousticConfig& config) {
  const Vec3 dims = dims_of(room);
  for (const Vec3* p : {&placement.source, &placement.microphone}) {
    for (int a = 0; a < 3; ++a) {
      const double v = (*p)[a];
      require(v > 0 && v < dims[a], ErrorKind::Geometry, "placement point outside the room");
      require(v >= config.min_wall_distance - 1e-12 &&
                  dims[a] - v >= config.min_wall_distance - 1e-12,
              ErrorKind::Geometry, "placement point closer to a wall than allowed");
    }
  }
  require(placement.separation() >= config.min_src_mic_distance - 1e-12, ErrorKind::Geometry,
          "source and microphone closer than allowed");
}

Placement sample_placement(const catalog::RoomSpec& room, Rng& rng,
                           const AcousticConfig& config) {
  config.validate();
  const Vec3 dims = dims_of(room);
  Vec3 lo{}, hi{}, span{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = config.min_wall_distance;
    hi[a] = dims[a] - config.min_wall_distance;
    require(lo[a] <= hi[a] && lo[a] > 0 && hi[a] < dims[a], ErrorKind::Geometry,
            "room class " + std::to_string(room.class_id) +
                " leaves no admissible interior for the wall margin");
    span[a] = hi[a] - lo[a];
  }
  require(norm3(span) >= config.min_src_mic_distance, ErrorKind::Geometry,
          "room class " + std::to_string(room.class_id) +
              " cannot separate source and microphone by the minimum distance");
  for (int attempt = 0; attempt < config.max_placement_attempts; ++attempt) {
    Placement p;
    for (int a = 0; a < 3; ++a) p.source[a] = rng.uniform(lo[a], hi[a]);
    for (int a = 0; a < 3; ++a) p.microphone[a] = rng.uniform(lo[a], hi[a]);
    if (p.separation() >= config.min_src_mic_distance) return p;
  }
  fail(ErrorKind::Sampling, "placement rejection budget exhausted for room class " +
                                std::to_string(room.class_id));
}

Rir generate_rir(const catalog::RoomSpec& room, const Placement& placement,
                 const Reflection& beta, const AcousticConfig& config) {
  config.validate();
  validate_placement(room, placement, config);
  for (double b : beta) {
    require(b >= 0 && b < 1, ErrorKind::Validation, "reflection coefficient outside [0, 1)");
  }
  const double fs = config.sample_rate;
  const double c = config.speed_of_sound;
  const auto n = config.rir_length;
  require(fs * placement.separation() / c < static_cast<double>(n), ErrorKind::Validation,
          "rir length too short to contain the direct path");

  const Vec3 dims = dims_of(room);
  const Vec3& s = placement.source;
  const Vec3& r = placement.microphone;
  const double max_dist = c * static_cast<double>(n + kKernelHalfWidth) / fs;
  const int order_limit = config.max_image_order;

  // Per axis: image offset, reflection order and attenuation for every (m, q).
  struct AxisImage {
    double offset;
    int order;
    double gain;
  };
  std::array<std::vector<AxisImage>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    const int m_max = static_cast<int>(std::ceil(max_dist / (2.0 * dims[a]))) + 1;
    for (int m = -m_max; m <= m_max; ++m) {
      for (int q = 0; q <= 1; ++q) {
        AxisImage img;
        img.offset = (1 - 2 * q) * s[a] + 2.0 * m * dims[a] - r[a];
        img.order = std::abs(2 * m - q);
        if (order_limit >= 0 && img.order > order_limit) continue;
        if (std::abs(img.offset) > max_dist) continue;
        img.gain = std::pow(beta[2 * a], std::abs(m - q)) * std::pow(beta[2 * a + 1], std::abs(m));
        axes[a].push_back(img);
      }
    }
  }

  std::vector<double> h(n, 0.0);
  const double max_dist2 = max_dist * max_dist;
  for (const AxisImage& ix : axes[0]) {
    for (const AxisImage& iy : axes[1]) {
      const double dxy2 = ix.offset * ix.offset + iy.offset * iy.offset;
      if (dxy2 > max_dist2) continue;
      const int oxy = ix.order + iy.order;
      if (order_limit >= 0 && oxy > order_limit) continue;
      const double gxy = ix.gain * iy.gain;
      for (const AxisImage& iz : axes[2]) {
        if (order_limit >= 0 && oxy + iz.order > order_limit) continue;
        const double d2 = dxy2 + iz.offset * iz.offset;
        if (d2 > max_dist2) continue;
        const double gain = gxy * iz.gain;
        if (gain == 0.0) continue;
        const double dist = std::sqrt(d2);
        add_arrival(h, fs * dist / c, gain / (4.0 * kPi * dist));
      }
    }
  }
  for (double v : h) {
    require(std::isfinite(v), ErrorKind::Numeric, "non-finite RIR sample");
  }

  Rir out;
  out.samples = std::move(h);
  out.sample_rate = fs;
  out.class_id = room.class_id;
  out.placement = placement;
  out.beta = beta;
  return out;
}

bool canonical_less(const Rir& a, const Rir& b) {
  if (a.class_id != b.class_id) return a.class_id < b.class_id;
  if (a.placement != b.placement) return a.placement < b.placement;
  return a.beta < b.beta;
}

void canonicalize(std::vector<Rir>& bank) {
  std::stable_sort(bank.begin(), bank.end(), canonical_less);
}

std::vector<Rir> generate_rir_bank(const catalog::Catalog& catalog, int per_class_count,
                                   std::uint64_t seed, const AcousticConfig& config,
                                   int jobs) {
  require(per_class_count >= 1, ErrorKind::Validation, "per-class RIR count must be >= 1");
  config.validate();
  const std::size_t per = static_cast<std::size_t>(per_class_count);
  const std::size_t total = catalog.size() * per;
  std::vector<Rir> bank(total);

  auto make = [&](std::size_t item) {
    const auto& room = catalog.rooms()[item / per];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(room.class_id), item % per));
    try {
      const Placement p = sample_placement(room, rng, config);
      const double b = rng.uniform(config.beta_min, config.beta_max);
      bank[item] = generate_rir(room, p, uniform_reflection(b), config);
    } catch (const Error& e) {
      throw Error(e.kind(), "class " + std::to_string(room.class_id) + ": " + e.what());
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, total);
  if (workers == 1) {
    for (std::size_t i = 0; i < total; ++i) make(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < total; i += workers) make(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  canonicalize(bank);
  return bank;
}

namespace {
constexpr char kBankMagic[4] = {'R', 'V', 'R', 'B'};
constexpr std::uint32_t kBankVersion = 1;
}  // namespace

void write_rir_bank(std::ostream& out, const RirBank& bank) {
  require(!bank.rirs.empty(), ErrorKind::Validation, "refusing to write an empty RIR bank");
  const auto length = bank.rirs.front().samples.size();
  const double fs = bank.rirs.front().sample_rate;
  out.write(kBankMagic, 4);
  io::write_u32(out, kBankVersion);
  io::write_u32(out, static_cast<std::uint32_t>(std::lround(fs)));
  io::write_u32(out, static_cast<std::uint32_t>(length));
  io::write_u64(out, bank.rirs.size());
  std::string hash = bank.config_hash;
  hash.resize(16, '0');
  out.write(hash.data(), 16);
  for (const Rir& r : bank.rirs) {
    require(r.samples.size() == length && r.sample_rate == fs, ErrorKind::Validation,
            "RIR bank entries must share length and sample rate");
    io::write_i32(out, r.class_id);
    for (double v : r.placement.source) io::write_f64(out, v);
    for (double v : r.placement.microphone) io::write_f64(out, v);
    io::write_f64(out, r.beta[0]);
    for (double v : r.samples) io::write_f32(out, static_cast<float>(v));
  }
}

RirBank read_rir_bank(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  require(in.gcount() == 4 && std::equal(magic, magic + 4, kBankMagic), ErrorKind::Format,
          "not an RIR bank (bad magic)");
  require(io::read_u32(in) == kBankVersion, ErrorKind::Format, "unsupported RIR bank version");
  const double fs = io::read_u32(in);
  const std::uint32_t length = io::read_u32(in);
  const std::uint64_t count = io::read_u64(in);
  RirBank bank;
  bank.config_hash.resize(16);
  in.read(bank.config_hash.data(), 16);
  require(in.gcount() == 16, ErrorKind::Format, "truncated RIR bank header");
  require(length > 0 && count < (1ull << 32), ErrorKind::Format, "implausible RIR bank header");
  bank.rirs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Rir r;
    r.sample_rate = fs;
    r.class_id = io::read_i32(in);
    for (double& v : r.placement.source) v = io::read_f64(in);
    for (double& v : r.placement.microphone) v = io::read_f64(in);
    r.beta = uniform_reflection(io::read_f64(in));
    r.samples.resize(length);
    for (double& v : r.samples) v = io::read_f32(in);
    bank.rirs.push_back(std::move(r));
  }
  return bank;
}

void save_rir_bank(const std::string& path, const RirBank& bank) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open for writing: " + path);
  write_rir_bank(out, bank);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path);
}

RirBank load_rir_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Data, "missing input file: " + path);
  return read_rir_bank(in);
}

}  // namespace revrir::sim
