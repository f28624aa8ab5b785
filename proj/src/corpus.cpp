#include "revrir/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "revrir/error.hpp"
#include "revrir/wav.hpp"

namespace revrir::corpus {

Utterance make_utterance(dsp::Signal signal, std::string source_id) {
  require(signal.sample_rate == kCorpusRate, ErrorKind::Validation,
          "utterance sample rate must be 8000 Hz");
  const double d = signal.duration();
  require(d >= kMinUtteranceSeconds - 1e-9 && d <= kMaxUtteranceSeconds + 1e-9,
          ErrorKind::Validation, "utterance duration must lie in [0.5, 10] s");
  for (double v : signal.samples) {
    require(std::isfinite(v), ErrorKind::Validation, "utterance has non-finite samples");
  }
  return {std::move(signal), std::move(source_id)};
}

Utterance synth_utterance(Rng& rng, double duration_s, const SynthConfig& config,
                          std::string source_id) {
  require(duration_s >= kMinUtteranceSeconds && duration_s <= kMaxUtteranceSeconds,
          ErrorKind::Validation, "synthetic utterance duration must lie in [0.5, 10] s");
  const double fs = config.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));

  std::vector<double> noise(n);
  for (double& v : noise) v = rng.normal();

  if (config.spectral_tilt) {
    const std::size_t nfft = dsp::next_power_of_two(n);
    auto spec = dsp::fft_real(noise, nfft);
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
      if (f > config.tilt_corner_hz) spec[k] *= config.tilt_corner_hz / f;
    }
    auto filtered = dsp::ifft_real(spec, nfft);
    std::copy(filtered.begin(), filtered.begin() + static_cast<long>(n), noise.begin());
  }

  std::vector<double> env(n, 0.0);
  for (std::size_t t = 0; t < n;) {
    const auto len = std::max<std::size_t>(
        1, static_cast<std::size_t>(rng.uniform(config.syllable_min_s, config.syllable_max_s) * fs));
    const double amp = rng.uniform(0.3, 1.0);
    for (std::size_t i = 0; i < len && t + i < n; ++i) {
      env[t + i] = amp * std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
    }
    t += len;
  }

  const std::size_t gaps = 2 * static_cast<std::size_t>(std::ceil(duration_s / 2.0));
  const std::size_t segment = n / gaps;
  for (std::size_t g = 0; g < gaps; ++g) {
    const double want = rng.uniform(config.gap_min_s, config.gap_max_s) * fs;
    const auto gap_len = static_cast<std::size_t>(std::min(want, segment / 2.0));
    const std::size_t start =
        g * segment + static_cast<std::size_t>(rng.uniform() * static_cast<double>(segment - gap_len));
    std::fill(env.begin() + static_cast<long>(start),
              env.begin() + static_cast<long>(start + gap_len), 0.0);
  }

  std::vector<double> x(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = noise[i] * env[i];
    peak = std::max(peak, std::abs(x[i]));
  }
  require(peak > 0, ErrorKind::Numeric, "synthetic utterance is silent");
  for (double& v : x) v *= config.peak / peak;
  return make_utterance({std::move(x), fs}, std::move(source_id));
}

ReverberantClip reverberate(const Utterance& s, const sim::Rir& h, std::size_t rir_index) {
  require(s.signal.sample_rate == h.sample_rate, ErrorKind::Validation,
          "utterance and RIR sample rates differ");
  auto full = dsp::convolve(std::span<const double>(s.signal.samples),
                            std::span<const double>(h.samples));
  full.resize(s.signal.samples.size());
  double peak = 0.0;
  for (double v : full) peak = std::max(peak, std::abs(v));
  ReverberantClip clip;
  clip.gain = peak > 0 ? 0.9 / peak : 1.0;
  for (double& v : full) v *= clip.gain;
  clip.signal = {std::move(full), s.signal.sample_rate};
  clip.class_id = h.class_id;
  clip.rir_index = rir_index;
  clip.source_id = s.source_id;
  return clip;
}

Utterance SourceRef::load(const SynthConfig& synth) const {
  if (!wav_path.empty()) return make_utterance(load_wav(wav_path), id);
  Rng rng(seed);
  return synth_utterance(rng, duration_s, synth, id);
}

std::vector<SourceRef> synthetic_sources(std::size_t count, double duration_s,
                                         std::uint64_t seed) {
  std::vector<SourceRef> out;
  for (std::size_t i = 0; i < count; ++i) {
    SourceRef r;
    r.seed = derive_seed(seed, 0x737263, i);
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%016llx", static_cast<unsigned long long>(r.seed));
    r.id = id;
    r.duration_s = duration_s;
    out.push_back(std::move(r));
  }
  return out;
}

void SplitPolicy::validate(std::size_t classes) const {
  require(train_rirs.size() == classes && val_rirs.size() == classes, ErrorKind::Config,
          "split policy does not cover every class");
  for (std::size_t c = 0; c < classes; ++c) {
    require(!train_rirs[c].empty() && !val_rirs[c].empty(), ErrorKind::Config,
            "class " + std::to_string(c) + " is missing from a split");
    std::set<std::size_t> t(train_rirs[c].begin(), train_rirs[c].end());
    for (auto v : val_rirs[c]) {
      require(!t.contains(v), ErrorKind::Config, "RIR index present in both splits");
    }
  }
  require(!train_sources.empty() && !val_sources.empty(), ErrorKind::Config,
          "both splits need at least one source");
  std::set<std::size_t> ts(train_sources.begin(), train_sources.end());
  for (auto v : val_sources) {
    require(!ts.contains(v), ErrorKind::Config, "source present in both splits");
  }
}

SplitPolicy make_split_policy(const std::vector<sim::Rir>& bank, std::size_t classes,
                              std::size_t source_count, double val_rir_fraction,
                              std::size_t val_source_count, std::uint64_t seed) {
  require(val_rir_fraction > 0 && val_rir_fraction < 1, ErrorKind::Config,
          "validation RIR fraction must lie in (0, 1)");
  require(val_source_count >= 1 && val_source_count < source_count, ErrorKind::Config,
          "validation sources must be a non-empty proper subset of the pool");
  SplitPolicy p;
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const int c = bank[i].class_id;
    require(c >= 0 && static_cast<std::size_t>(c) < classes, ErrorKind::Data,
            "RIR " + std::to_string(i) + " has a class outside the catalog");
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    auto& idx = by_class[c];
    Rng rng(derive_seed(seed, 0x726972, c));
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n_val = static_cast<std::size_t>(
        std::max(1.0, std::round(val_rir_fraction * static_cast<double>(idx.size()))));
    require(idx.size() > n_val, ErrorKind::Config,
            "class " + std::to_string(c) + " has too few RIRs for both splits");
    p.val_rirs.emplace_back(idx.begin(), idx.begin() + static_cast<long>(n_val));
    p.train_rirs.emplace_back(idx.begin() + static_cast<long>(n_val), idx.end());
  }
  std::vector<std::size_t> src(source_count);
  for (std::size_t i = 0; i < source_count; ++i) src[i] = i;
  Rng rng(derive_seed(seed, 0x737263));
  rng.shuffle(std::span<std::size_t>(src));
  p.val_sources.assign(src.begin(), src.begin() + static_cast<long>(val_source_count));
  p.train_sources.assign(src.begin() + static_cast<long>(val_source_count), src.end());
  p.validate(classes);
  return p;
}

Dataset build_dataset(const catalog::Catalog& catalog, std::vector<sim::Rir> bank,
                      const std::vector<SourceRef>& sources, const SplitPolicy& policy,
                      std::size_t pairs_per_class, std::uint64_t seed) {
  require(pairs_per_class >= 1, ErrorKind::Validation, "pairs per class must be >= 1");
  sim::canonicalize(bank);
  policy.validate(catalog.size());
  for (const auto* side : {&policy.train_sources, &policy.val_sources}) {
    for (auto s : *side) {
      require(s < sources.size(), ErrorKind::Config, "split policy names a missing source");
    }
  }
  for (const auto* side : {&policy.train_rirs, &policy.val_rirs}) {
    for (std::size_t c = 0; c < side->size(); ++c) {
      for (auto i : (*side)[c]) {
        require(i < bank.size() && bank[i].class_id == static_cast<int>(c), ErrorKind::Config,
                "split policy RIR index does not match the bank");
      }
    }
  }

  Dataset out;
  out.sources = sources;
  auto fill = [&](const std::vector<std::vector<std::size_t>>& rirs,
                  const std::vector<std::size_t>& srcs, std::uint64_t split_tag,
                  std::vector<DatasetItem>& items) {
    std::vector<std::size_t> src_order = srcs;
    Rng src_rng(derive_seed(seed, split_tag, 0x737263));
    src_rng.shuffle(std::span<std::size_t>(src_order));
    std::size_t next_source = 0;
    for (std::size_t c = 0; c < catalog.size(); ++c) {
      Rng rng(derive_seed(seed, split_tag, c + 1));
      std::vector<std::size_t> clip_order = rirs[c];
      rng.shuffle(std::span<std::size_t>(clip_order));
      for (std::size_t k = 0; k < pairs_per_class; ++k) {
        DatasetItem item;
        item.class_id = static_cast<int>(c);
        item.clip_rir = clip_order[k % clip_order.size()];
        item.paired_rir = rirs[c][rng.index(rirs[c].size())];
        item.source = src_order[next_source++ % src_order.size()];
        items.push_back(item);
      }
    }
  };
  fill(policy.train_rirs, policy.train_sources, 1, out.train);
  fill(policy.val_rirs, policy.val_sources, 2, out.val);

  // Leakage checks.
  std::set<std::size_t> train_rirs, train_srcs;
  for (const auto& it : out.train) {
    train_rirs.insert(it.clip_rir);
    train_rirs.insert(it.paired_rir);
    train_srcs.insert(it.source);
  }
  for (const auto& it : out.val) {
    require(!train_rirs.contains(it.clip_rir) && !train_rirs.contains(it.paired_rir),
            ErrorKind::Config, "validation item reuses a training RIR");
    require(!train_srcs.contains(it.source) &&
                std::none_of(out.train.begin(), out.train.end(),
                             [&](const DatasetItem& t) {
                               return sources[t.source].id == sources[it.source].id;
                             }),
            ErrorKind::Config, "validation item reuses a training source");
  }
  return out;
}

void write_manifest(std::ostream& out, const Dataset& d) {
  out << "revrir-manifest v1\n";
  out << "config_hash " << (d.config_hash.empty() ? "none" : d.config_hash) << '\n';
  for (std::size_t i = 0; i < d.sources.size(); ++i) {
    const auto& s = d.sources[i];
    require(!s.id.empty() && s.id.find_first_of(" \t\r\n") == std::string::npos,
            ErrorKind::Validation, "source id '" + s.id + "' must be a single token");
    char dur[32];
    std::snprintf(dur, sizeof(dur), "%.6f", s.duration_s);
    out << "source " << i << ' ' << s.id << ' ' << dur << ' ';
    if (s.wav_path.empty()) {
      out << "seed:" << s.seed << '\n';
    } else {
      out << "wav:" << s.wav_path << '\n';
    }
  }
  for (const auto* split : {&d.train, &d.val}) {
    const char* name = split == &d.train ? "train" : "val";
    for (const auto& it : *split) {
      out << "item " << name << ' ' << it.class_id << ' ' << it.clip_rir << ' ' << it.paired_rir
          << ' ' << it.source << '\n';
    }
  }
}

Dataset read_manifest(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "revrir-manifest v1",
          ErrorKind::Format, "manifest lacks 'revrir-manifest v1' header");
  Dataset d;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    const std::string where = " at manifest line " + std::to_string(lineno);
    if (kind == "config_hash") {
      ls >> d.config_hash;
      if (d.config_hash == "none") d.config_hash.clear();
    } else if (kind == "source") {
      std::size_t index = 0;
      SourceRef s;
      std::string origin;
      require(static_cast<bool>(ls >> index >> s.id >> s.duration_s), ErrorKind::Format,
              "malformed source record" + where);
      // The origin runs to the end of the line so WAV paths may hold spaces.
      std::getline(ls >> std::ws, origin);
      require(index == d.sources.size(), ErrorKind::Format, "source records out of order" + where);
      if (origin.rfind("seed:", 0) == 0) {
        const std::string digits = origin.substr(5);
        require(!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos,
                ErrorKind::Format, "malformed source seed" + where);
        try {
          s.seed = std::stoull(digits);
        } catch (const std::out_of_range&) {
          fail(ErrorKind::Format, "source seed out of range" + where);
        }
      } else if (origin.rfind("wav:", 0) == 0 && origin.size() > 4) {
        s.wav_path = origin.substr(4);
      } else {
        fail(ErrorKind::Format, "unknown source origin" + where);
      }
      d.sources.push_back(std::move(s));
    } else if (kind == "item") {
      std::string split;
      DatasetItem it;
      require(static_cast<bool>(ls >> split >> it.class_id >> it.clip_rir >> it.paired_rir >>
                                it.source),
              ErrorKind::Format, "malformed item record" + where);
      require(it.source < d.sources.size(), ErrorKind::Format, "item names unknown source" + where);
      if (split == "train") {
        d.train.push_back(it);
      } else if (split == "val") {
        d.val.push_back(it);
      } else {
        fail(ErrorKind::Format, "unknown split '" + split + "'" + where);
      }
    } else {
      fail(ErrorKind::Format, "unknown manifest record '" + kind + "'" + where);
    }
  }
  return d;
}

SplitFeatures materialize(const std::vector<DatasetItem>& items,
                          const std::vector<SourceRef>& sources,
                          const std::vector<sim::Rir>& bank, const joint::FeatureConfig& features,
                          const SynthConfig& synth) {
  SplitFeatures out;
  std::map<std::size_t, Utterance> utterances;
  std::map<std::size_t, std::vector<double>> rir_cache;
  auto rir_feature = [&](std::size_t idx) -> const std::vector<double>& {
    require(idx < bank.size(), ErrorKind::Data, "dataset references a missing RIR");
    auto it = rir_cache.find(idx);
    if (it == rir_cache.end()) {
      it = rir_cache.emplace(idx, joint::rir_features(bank[idx], features)).first;
    }
    return it->second;
  };
  for (const auto& item : items) {
    require(item.source < sources.size(), ErrorKind::Data, "dataset references a missing source");
    auto u = utterances.find(item.source);
    if (u == utterances.end()) u = utterances.emplace(item.source, sources[item.source].load(synth)).first;
    require(bank[item.clip_rir].class_id == item.class_id &&
                bank[item.paired_rir].class_id == item.class_id,
            ErrorKind::Data, "dataset item class does not match its RIRs");
    const ReverberantClip clip = reverberate(u->second, bank[item.clip_rir], item.clip_rir);
    out.pairs.speech.push_back(joint::speech_features(clip.signal, features));
    out.pairs.rir.push_back(rir_feature(item.paired_rir));
    out.pairs.labels.push_back(item.class_id);
    out.clip_rirs.push_back(item.clip_rir);
  }
  std::set<std::size_t> unique(out.clip_rirs.begin(), out.clip_rirs.end());
  for (std::size_t idx : unique) {
    out.rir_ids.push_back(idx);
    out.rir_features.push_back(rir_feature(idx));
    out.rir_labels.push_back(bank[idx].class_id);
  }
  return out;
}

}  // namespace revrir::corpus
