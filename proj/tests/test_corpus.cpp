#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "revrir/corpus.hpp"
#include "revrir/error.hpp"
#include "revrir/wav.hpp"

using namespace revrir;
using namespace revrir::corpus;

namespace {

double spectral_centroid(const std::vector<double>& x, double fs) {
  const std::size_t n = dsp::next_power_of_two(x.size());
  const auto spec = dsp::fft_real(x, n);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double p = std::norm(spec[k]);
    num += p * fs * static_cast<double>(k) / static_cast<double>(n);
    den += p;
  }
  return num / den;
}

double peak_of(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Validation;
}

sim::Rir delta_rir(std::size_t length, std::size_t at, double value) {
  sim::Rir r;
  r.samples.assign(length, 0.0);
  r.samples[at] = value;
  return r;
}

std::vector<sim::Rir> small_bank(std::size_t per_class, std::uint64_t seed) {
  const auto cat = catalog::enumerate_rooms(catalog::desk_ranges());
  sim::AcousticConfig cfg;
  cfg.rir_length = 256;
  return sim::generate_rir_bank(cat, static_cast<int>(per_class), seed, cfg);
}

}  // namespace

TEST(Corpus, SynthLengthAndPeak) {
  Rng rng(1);
  const Utterance u = synth_utterance(rng, 2.0);
  EXPECT_EQ(u.signal.samples.size(), 16000u);
  EXPECT_EQ(u.signal.sample_rate, 8000.0);
  EXPECT_NEAR(peak_of(u.signal.samples), 0.5, 1e-12);
  Rng again(1);
  EXPECT_EQ(synth_utterance(again, 2.0).signal.samples, u.signal.samples);
}

TEST(Corpus, SynthHasSilentGaps) {
  Rng rng(4);
  const auto x = synth_utterance(rng, 4.0).signal.samples;
  // Count 50 ms windows that are exactly silent.
  std::size_t silent = 0;
  for (std::size_t start = 0; start + 400 <= x.size(); start += 400) {
    if (std::all_of(x.begin() + start, x.begin() + start + 400, [](double v) { return v == 0.0; })) ++silent;
  }
  EXPECT_GE(silent, 2u);
}

TEST(Corpus, TiltLowersSpectralCentroid) {
  SynthConfig flat;
  flat.spectral_tilt = false;
  double tilted_sum = 0.0, flat_sum = 0.0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    Rng a(s), b(s);
    tilted_sum += spectral_centroid(synth_utterance(a, 2.0).signal.samples, 8000.0);
    flat_sum += spectral_centroid(synth_utterance(b, 2.0, flat).signal.samples, 8000.0);
  }
  EXPECT_LT(tilted_sum, 0.75 * flat_sum);
}

TEST(Corpus, UtteranceValidation) {
  EXPECT_EQ(kind_of([] { make_utterance({std::vector<double>(100, 0.0), 8000.0}, "x"); }),
            ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { make_utterance({std::vector<double>(16000, 0.0), 16000.0}, "x"); }),
            ErrorKind::Validation);
  EXPECT_NO_THROW(make_utterance({std::vector<double>(4000, 0.0), 8000.0}, "x"));
  Rng rng(1);
  EXPECT_THROW(synth_utterance(rng, 11.0), Error);
}

TEST(Corpus, ReverberateWithDeltaIsScaledCopy) {
  Rng rng(2);
  const Utterance u = synth_utterance(rng, 1.0);
  const auto clip = reverberate(u, delta_rir(64, 0, 0.3), 7);
  ASSERT_EQ(clip.signal.samples.size(), u.signal.samples.size());
  EXPECT_NEAR(peak_of(clip.signal.samples), 0.9, 1e-12);
  EXPECT_EQ(clip.rir_index, 7u);
  for (std::size_t i = 0; i < u.signal.samples.size(); ++i) {
    EXPECT_NEAR(clip.signal.samples[i], u.signal.samples[i] * 0.9 / 0.5, 1e-9);
  }
}

TEST(Corpus, ReverberateMatchesDirectConvolution) {
  Rng rng(3);
  const Utterance u = synth_utterance(rng, 0.5);
  const auto bank = small_bank(1, 3);
  const auto clip = reverberate(u, bank[0]);
  const auto full = oracle::direct_convolution(u.signal.samples, bank[0].samples);
  for (std::size_t i = 0; i < clip.signal.samples.size(); ++i) {
    EXPECT_NEAR(clip.signal.samples[i] / clip.gain, full[i], 1e-9);
  }
}

TEST(Corpus, ConvolutionIsLinearInTheSource) {
  Rng rng(5);
  const auto a = synth_utterance(rng, 1.0).signal.samples;
  const auto b = synth_utterance(rng, 1.0).signal.samples;
  const auto h = small_bank(1, 4)[0].samples;
  std::vector<double> mix(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
  const auto ya = dsp::convolve(a, h), yb = dsp::convolve(b, h), ym = dsp::convolve(mix, h);
  for (std::size_t i = 0; i < ym.size(); ++i) EXPECT_NEAR(ym[i], 2.0 * ya[i] - 0.5 * yb[i], 1e-9);
}

TEST(Corpus, ReflectiveRoomHasMoreTailEnergy) {
  catalog::RoomSpec room;
  room.width = catalog::Length::from_meters(3.5);
  room.depth = catalog::Length::from_meters(4.5);
  room.height = catalog::Length::from_meters(3.0);
  const sim::Placement p{{1.0, 1.2, 1.5}, {2.6, 3.3, 1.4}};
  sim::AcousticConfig cfg;
  Rng rng(6);
  const Utterance u = synth_utterance(rng, 2.0);
  // Energy of s * h in the 100 ms starting 15 ms after the source ends,
  // relative to the total. Only reflections can reach that window.
  auto tail_fraction = [&](double beta) {
    const auto h = sim::generate_rir(room, p, sim::uniform_reflection(beta), cfg);
    const auto full = dsp::convolve(u.signal.samples, h.samples);
    const std::size_t start = u.signal.samples.size() + 120;
    double tail = 0.0, total = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) {
      total += full[i] * full[i];
      if (i >= start && i < start + 800) tail += full[i] * full[i];
    }
    return tail / total;
  };
  EXPECT_LT(tail_fraction(0.0), 1e-20);
  EXPECT_GT(tail_fraction(0.9), 1e-3);
}

TEST(Corpus, WavRoundTrip) {
  dsp::Signal x;
  x.sample_rate = 8000.0;
  for (int i = 0; i < 800; ++i) x.samples.push_back(0.7 * std::sin(0.01 * i));
  const auto back = decode_wav(encode_wav(x));
  ASSERT_EQ(back.samples.size(), x.samples.size());
  for (std::size_t i = 0; i < x.samples.size(); ++i) EXPECT_NEAR(back.samples[i], x.samples[i], 1.0 / 32768.0);

  const auto dir = std::filesystem::temp_directory_path() / "revrir_wav_test";
  std::filesystem::create_directories(dir);
  save_wav(x, (dir / "a.wav").string());
  EXPECT_EQ(load_wav((dir / "a.wav").string()).samples, back.samples);
  std::filesystem::remove_all(dir);
}

TEST(Corpus, WavFormatErrors) {
  dsp::Signal x{std::vector<double>(100, 0.1), 8000.0};
  const std::string good = encode_wav(x);
  auto patched = [&](std::size_t offset, std::uint16_t value) {
    std::string b = good;
    std::memcpy(b.data() + offset, &value, 2);
    return b;
  };
  // Canonical header: format at 20, channels at 22, sample rate at 24, bits at 34.
  EXPECT_EQ(kind_of([&] { decode_wav(patched(20, 3)); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { decode_wav(patched(22, 2)); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { decode_wav(patched(34, 8)); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { decode_wav(good, 16000.0); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { decode_wav("RIFF"); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { load_wav("/nonexistent/file.wav"); }), ErrorKind::Data);
}

TEST(Corpus, SplitPolicyHasNoLeakage) {
  auto bank = small_bank(10, 1);
  const SplitPolicy p = make_split_policy(bank, 6, 20, 0.2, 4, 9);
  EXPECT_NO_THROW(p.validate(6));
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_EQ(p.val_rirs[c].size(), 2u);
    EXPECT_EQ(p.train_rirs[c].size(), 8u);
    for (std::size_t i : p.val_rirs[c]) {
      EXPECT_EQ(std::count(p.train_rirs[c].begin(), p.train_rirs[c].end(), i), 0);
      EXPECT_EQ(bank[i].class_id, static_cast<int>(c));
    }
  }
  EXPECT_EQ(p.val_sources.size(), 4u);
  EXPECT_EQ(p.train_sources.size(), 16u);
  SplitPolicy leaky = p;
  leaky.val_sources.push_back(leaky.train_sources.front());
  EXPECT_EQ(kind_of([&] { leaky.validate(6); }), ErrorKind::Config);
}

TEST(Corpus, DatasetSizesAndLeakage) {
  const auto cat = catalog::enumerate_rooms(catalog::desk_ranges());
  auto bank = small_bank(10, 2);
  const auto sources = synthetic_sources(20, 1.0, 4);
  const SplitPolicy p = make_split_policy(bank, 6, 20, 0.2, 4, 5);
  const Dataset d = build_dataset(cat, bank, sources, p, 50, 6);
  EXPECT_EQ(d.train.size(), 300u);
  EXPECT_EQ(d.val.size(), 300u);
  std::set<std::size_t> train_rirs, train_srcs;
  for (const auto& it : d.train) {
    EXPECT_EQ(bank[it.clip_rir].class_id, it.class_id);
    EXPECT_EQ(bank[it.paired_rir].class_id, it.class_id);
    train_rirs.insert(it.clip_rir);
    train_rirs.insert(it.paired_rir);
    train_srcs.insert(it.source);
  }
  for (const auto& it : d.val) {
    EXPECT_FALSE(train_rirs.contains(it.clip_rir));
    EXPECT_FALSE(train_rirs.contains(it.paired_rir));
    EXPECT_FALSE(train_srcs.contains(it.source));
  }
}

TEST(Corpus, DatasetIgnoresBankOrder) {
  const auto cat = catalog::enumerate_rooms(catalog::desk_ranges());
  auto bank = small_bank(6, 3);
  const auto sources = synthetic_sources(10, 1.0, 4);
  const SplitPolicy p = make_split_policy(bank, 6, 10, 0.2, 2, 5);
  auto shuffled = bank;
  Rng rng(77);
  rng.shuffle(std::span<sim::Rir>(shuffled));
  const Dataset a = build_dataset(cat, bank, sources, p, 12, 6);
  const Dataset b = build_dataset(cat, shuffled, sources, p, 12, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
}

TEST(Corpus, ManifestRoundTrip) {
  const auto cat = catalog::enumerate_rooms(catalog::desk_ranges());
  auto bank = small_bank(6, 3);
  auto sources = synthetic_sources(10, 1.5, 4);
  sources[2].wav_path = "/data/a b.wav";
  sources[2].seed = 0;  // file-backed sources carry no seed
  const SplitPolicy p = make_split_policy(bank, 6, 10, 0.2, 2, 5);
  Dataset d = build_dataset(cat, bank, sources, p, 5, 6);
  d.config_hash = "00112233aabbccdd";
  std::stringstream ss;
  write_manifest(ss, d);
  const Dataset back = read_manifest(ss);
  EXPECT_EQ(back.config_hash, d.config_hash);
  EXPECT_EQ(back.train, d.train);
  EXPECT_EQ(back.val, d.val);
  ASSERT_EQ(back.sources.size(), d.sources.size());
  for (std::size_t i = 0; i < d.sources.size(); ++i) {
    EXPECT_EQ(back.sources[i].id, d.sources[i].id);
    EXPECT_EQ(back.sources[i].seed, d.sources[i].seed);
    EXPECT_EQ(back.sources[i].wav_path, d.sources[i].wav_path);
    EXPECT_EQ(back.sources[i].duration_s, d.sources[i].duration_s);
  }
  std::stringstream bad("revrir-manifest v2\n");
  EXPECT_EQ(kind_of([&] { read_manifest(bad); }), ErrorKind::Format);
}

TEST(Corpus, MaterializeAlignsFeatures) {
  const auto cat = catalog::enumerate_rooms(catalog::desk_ranges());
  sim::AcousticConfig acfg;
  auto bank = sim::generate_rir_bank(cat, 4, 3, acfg);
  const auto sources = synthetic_sources(6, 1.0, 4);
  const SplitPolicy p = make_split_policy(bank, 6, 6, 0.25, 2, 5);
  const Dataset d = build_dataset(cat, bank, sources, p, 3, 6);
  joint::FeatureConfig fc;
  const SplitFeatures f = materialize(d.val, d.sources, bank, fc, {});
  ASSERT_EQ(f.pairs.size(), d.val.size());
  for (std::size_t i = 0; i < d.val.size(); ++i) {
    EXPECT_EQ(f.pairs.labels[i], d.val[i].class_id);
    EXPECT_EQ(f.pairs.rir[i].size(), fc.rir_bins());
    EXPECT_EQ(f.pairs.speech[i].size() % fc.speech_bins(), 0u);
    EXPECT_EQ(f.clip_rirs[i], d.val[i].clip_rir);
  }
  EXPECT_EQ(f.rir_ids.size(), f.rir_features.size());
  EXPECT_EQ(f.rir_ids.size(), f.rir_labels.size());
}
