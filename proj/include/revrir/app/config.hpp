#pragma once

// Run configuration for the command pipeline: every tunable of every stage,
// two presets, JSON (de)serialization and layered overrides.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "revrir/baseline.hpp"
#include "revrir/catalog.hpp"
#include "revrir/corpus.hpp"
#include "revrir/encoders.hpp"
#include "revrir/finetune.hpp"
#include "revrir/pretrain.hpp"
#include "revrir/simulate.hpp"

namespace revrir::app {

using Json = nlohmann::json;

struct CorpusSettings {
  std::size_t source_count = 60;
  double source_duration_s = 2.0;
  std::size_t val_source_count = 12;
  double val_rir_fraction = 0.2;
  std::size_t pairs_per_class = 320;
  /// When set, dry sources are the *.wav files of this directory (sorted by
  /// name) instead of synthetic ones.
  std::string wav_dir;
  corpus::SynthConfig synth;
};

struct ModelSettings {
  std::size_t d = 32;
  std::vector<std::size_t> rir_hidden = {256, 192, 128};
  std::size_t speech_frame_dim = 128;
  std::vector<std::size_t> speech_hidden = {64};
  double tau_init = 0.07;
};

struct FinetuneSettings {
  /// Heads trained by the finetune command, one per listed encoder.
  std::vector<tasks::EncoderChoice> encoders = {tasks::EncoderChoice::Speech,
                                                tasks::EncoderChoice::Rir};
  tasks::FinetuneConfig head;  // encoder and seed are filled per run
};

struct RunConfig {
  std::string preset = "desk";
  catalog::CatalogRanges catalog;
  sim::AcousticConfig acoustic;
  std::size_t rirs_per_class = 200;
  CorpusSettings corpus;
  joint::FeatureConfig features;
  ModelSettings model;
  joint::PretrainConfig pretrain;  // seed is derived from `seed`
  FinetuneSettings finetune;
  tasks::BaselineConfig baseline;  // seed is derived from `seed`
  std::uint64_t seed = 1;
  /// Worker threads for the generation stages. Not part of the hash.
  int jobs = 1;

  joint::RirEncoderConfig rir_encoder() const;
  joint::SpeechEncoderConfig speech_encoder() const;
  void validate() const;
};

RunConfig preset_config(const std::string& name);

Json to_json(const RunConfig& config);
/// Strict: unknown keys, missing keys and wrong types are config errors.
RunConfig config_from_json(const Json& json);

/// 16 hex digits of FNV-1a over the canonical JSON with `jobs` removed.
std::string config_hash(const RunConfig& config);

/// Environment variable for a dotted key: REVRIR_ + upper-case key with
/// dots replaced by underscores, e.g. pretrain.lr -> REVRIR_PRETRAIN_LR.
std::string env_name(const std::string& dotted_key);

struct Overrides {
  /// Base preset; falls back to the file's "preset" entry, then "desk".
  std::optional<std::string> preset;
  std::optional<std::string> file;
  /// (name, value) pairs; only REVRIR_* names are considered.
  std::vector<std::pair<std::string, std::string>> environment;
  /// key=value assignments from the command line.
  std::vector<std::string> assignments;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

struct ResolvedConfig {
  RunConfig config;
  std::string hash;
  /// One line per applied layer or override, in application order.
  std::vector<std::string> log;
};

/// preset < file < environment < command line.
ResolvedConfig resolve_config(const Overrides& overrides);

/// Snapshot of the process environment as (name, value) pairs.
std::vector<std::pair<std::string, std::string>> process_environment();

}  // namespace revrir::app
