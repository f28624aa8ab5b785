#pragma once

// Dry sources, reverberant clips and split-aware dataset assembly.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "revrir/catalog.hpp"
#include "revrir/dsp.hpp"
#include "revrir/encoders.hpp"
#include "revrir/pretrain.hpp"
#include "revrir/rng.hpp"
#include "revrir/simulate.hpp"

namespace revrir::corpus {

inline constexpr double kCorpusRate = 8000.0;
inline constexpr double kMinUtteranceSeconds = 0.5;
inline constexpr double kMaxUtteranceSeconds = 10.0;

struct Utterance {
  dsp::Signal signal;
  std::string source_id;
};

/// Checks the 8 kHz rate and the 0.5-10 s duration window.
Utterance make_utterance(dsp::Signal signal, std::string source_id);

struct SynthConfig {
  double sample_rate = kCorpusRate;
  /// -6 dB/octave roll-off above this frequency; disabled when false.
  bool spectral_tilt = true;
  double tilt_corner_hz = 500.0;
  double syllable_min_s = 0.15;
  double syllable_max_s = 0.35;
  double gap_min_s = 0.1;
  double gap_max_s = 0.4;
  double peak = 0.5;
};

/// Speech-shaped noise: tilted white noise under a random syllabic envelope
/// (half-sine bumps averaging 4 per second) with at least two silent gaps
/// per two seconds, peak-normalized.
Utterance synth_utterance(Rng& rng, double duration_s, const SynthConfig& config = {},
                          std::string source_id = "synthetic");

struct ReverberantClip {
  dsp::Signal signal;
  int class_id = 0;
  std::size_t rir_index = 0;
  std::string source_id;
  /// Applied after convolution; signal / gain is the raw s * h.
  double gain = 1.0;
};

/// s * h truncated to len(s), then scaled to a 0.9 peak.
ReverberantClip reverberate(const Utterance& s, const sim::Rir& h, std::size_t rir_index = 0);

/// Where a dry source comes from: a synthesis seed or a WAV path.
struct SourceRef {
  std::string id;
  std::uint64_t seed = 0;
  std::string wav_path;  // empty for synthetic sources
  double duration_s = 2.0;

  Utterance load(const SynthConfig& synth) const;
};

/// Disjoint train/val partitions of RIR indices (per class, canonical bank
/// order) and of sources.
struct SplitPolicy {
  std::vector<std::vector<std::size_t>> train_rirs;  // [class] -> indices
  std::vector<std::vector<std::size_t>> val_rirs;
  std::vector<std::size_t> train_sources;  // indices into the source pool
  std::vector<std::size_t> val_sources;

  /// No overlaps and every class present on both sides.
  void validate(std::size_t classes) const;
};

SplitPolicy make_split_policy(const std::vector<sim::Rir>& canonical_bank, std::size_t classes,
                              std::size_t source_count, double val_rir_fraction,
                              std::size_t val_source_count, std::uint64_t seed);

struct DatasetItem {
  int class_id = 0;
  std::size_t clip_rir = 0;    // RIR convolved into the clip
  std::size_t paired_rir = 0;  // same class, possibly a different RIR
  std::size_t source = 0;      // index into the source pool

  friend auto operator<=>(const DatasetItem&, const DatasetItem&) = default;
};

struct Dataset {
  std::vector<SourceRef> sources;
  std::vector<DatasetItem> train;
  std::vector<DatasetItem> val;
  std::string config_hash;
};

/// pairs_per_class items per class in each split. The bank is put in
/// canonical order first, so RIR indices refer to that order and the result
/// does not depend on how the bank was shuffled.
Dataset build_dataset(const catalog::Catalog& catalog, std::vector<sim::Rir> bank,
                      const std::vector<SourceRef>& sources, const SplitPolicy& policy,
                      std::size_t pairs_per_class, std::uint64_t seed);

/// Synthetic pool of `count` sources of fixed duration with seeded ids.
std::vector<SourceRef> synthetic_sources(std::size_t count, double duration_s, std::uint64_t seed);

// Manifest, version 1:
//   revrir-manifest v1
//   config_hash <hex>
//   source <index> <id> <duration_s> seed:<u64>|wav:<path to end of line>
//   item <train|val> <class_id> <clip_rir> <paired_rir> <source_index>
void write_manifest(std::ostream& out, const Dataset& dataset);
Dataset read_manifest(std::istream& in);

/// Encoder inputs for one split.
struct SplitFeatures {
  joint::PairedFeatures pairs;
  std::vector<std::size_t> clip_rirs;
  /// Unique RIRs used as clip RIRs in the split, with their features/labels.
  std::vector<std::size_t> rir_ids;
  std::vector<std::vector<double>> rir_features;
  std::vector<int> rir_labels;
};

SplitFeatures materialize(const std::vector<DatasetItem>& items,
                          const std::vector<SourceRef>& sources,
                          const std::vector<sim::Rir>& canonical_bank,
                          const joint::FeatureConfig& features, const SynthConfig& synth);

}  // namespace revrir::corpus
