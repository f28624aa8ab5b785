#include "revrir/app/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "revrir/binary_io.hpp"
#include "revrir/error.hpp"

extern char** environ;

namespace revrir::app {
namespace {

// Strict object reader: every key must be consumed exactly once.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), ErrorKind::Config, where() + " must be an object");
  }
  ~Reader() = default;

  const Json& at(const std::string& key) {
    require(j_.contains(key), ErrorKind::Config, "missing key " + where(key));
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = at(key);
    require(v.is_number(), ErrorKind::Config, where(key) + " must be a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key) {
    const Json& v = at(key);
    require(v.is_number_integer() && v.get<long long>() >= 0, ErrorKind::Config,
            where(key) + " must be a non-negative integer");
    return v.get<std::size_t>();
  }

  long long integer(const std::string& key) {
    const Json& v = at(key);
    require(v.is_number_integer(), ErrorKind::Config, where(key) + " must be an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key) {
    const Json& v = at(key);
    require(v.is_boolean(), ErrorKind::Config, where(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = at(key);
    require(v.is_string(), ErrorKind::Config, where(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<std::size_t> counts(const std::string& key) {
    const Json& v = at(key);
    require(v.is_array(), ErrorKind::Config, where(key) + " must be an array");
    std::vector<std::size_t> out;
    for (const auto& x : v) {
      require(x.is_number_integer() && x.get<long long>() > 0, ErrorKind::Config,
              where(key) + " must hold positive integers");
      out.push_back(x.get<std::size_t>());
    }
    return out;
  }

  Reader object(const std::string& key) { return Reader(at(key), where(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      require(seen_.contains(key), ErrorKind::Config, "unknown key " + where(key));
    }
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json range_json(const catalog::DimensionRange& r) {
  return Json::array({r.min.meters(), r.max.meters(), r.hop.meters()});
}

catalog::DimensionRange range_from(const Json& v, const std::string& where) {
  require(v.is_array() && v.size() == 3 && v[0].is_number() && v[1].is_number() &&
              v[2].is_number(),
          ErrorKind::Config, where + " must be [min, max, hop] in meters");
  return catalog::DimensionRange::meters(v[0].get<double>(), v[1].get<double>(),
                                         v[2].get<double>());
}

const char* sampler_name(joint::BatchSampler s) {
  return s == joint::BatchSampler::Uniform ? "uniform" : "distinct_class";
}

joint::BatchSampler sampler_from(const std::string& s) {
  if (s == "uniform") return joint::BatchSampler::Uniform;
  if (s == "distinct_class") return joint::BatchSampler::DistinctClass;
  fail(ErrorKind::Config, "pretrain.sampler must be uniform or distinct_class");
}

void collect_leaves(const Json& j, const std::string& prefix, std::map<std::string, Json>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      collect_leaves(v, prefix.empty() ? k : prefix + "." + k, out);
    }
  } else {
    out[prefix] = j;
  }
}

Json* find_leaf(Json& root, const std::string& dotted) {
  Json* cur = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return cur->is_object() ? nullptr : cur;
}

void assign(Json& root, const std::string& key, const std::string& text,
            const std::string& origin) {
  Json* leaf = find_leaf(root, key);
  require(leaf != nullptr, ErrorKind::Config, origin + ": unknown config key '" + key + "'");
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }
  if (leaf->is_string() && !value.is_string()) value = text;
  const bool compatible = (leaf->is_number() && value.is_number()) ||
                          (leaf->is_string() && value.is_string()) ||
                          (leaf->is_boolean() && value.is_boolean()) ||
                          (leaf->is_array() && value.is_array());
  require(compatible, ErrorKind::Config,
          origin + ": value '" + text + "' has the wrong type for '" + key + "'");
  *leaf = value;
}

}  // namespace

joint::RirEncoderConfig RunConfig::rir_encoder() const {
  joint::RirEncoderConfig c;
  c.input_bins = features.rir_bins();
  c.dims = model.rir_hidden;
  c.dims.push_back(model.d);
  return c;
}

joint::SpeechEncoderConfig RunConfig::speech_encoder() const {
  joint::SpeechEncoderConfig c;
  c.input_bins = features.speech_bins();
  c.frame_dim = model.speech_frame_dim;
  c.dims = model.speech_hidden;
  c.dims.push_back(model.d);
  return c;
}

void RunConfig::validate() const {
  for (const auto& t : catalog.types) {
    t.width.validate();
    t.depth.validate();
    t.height.validate();
  }
  acoustic.validate();
  require(rirs_per_class >= 2, ErrorKind::Config, "bank.rirs_per_class must be >= 2");
  require(acoustic.rir_length == features.rir_fft_size, ErrorKind::Config,
          "features.rir_fft_size must equal acoustic.rir_length");
  require(acoustic.sample_rate == corpus::kCorpusRate && features.sample_rate == acoustic.sample_rate,
          ErrorKind::Config, "the pipeline runs at 8000 Hz");
  require(dsp::is_power_of_two(features.frame_length) && features.hop >= 1, ErrorKind::Config,
          "features.frame_length must be a power of two and hop >= 1");
  require(corpus.source_duration_s >= corpus::kMinUtteranceSeconds &&
              corpus.source_duration_s <= corpus::kMaxUtteranceSeconds,
          ErrorKind::Config, "corpus.source_duration_s must lie in [0.5, 10]");
  require(corpus.pairs_per_class >= 1, ErrorKind::Config, "corpus.pairs_per_class must be >= 1");
  require(corpus.val_source_count >= 1 && corpus.val_source_count < corpus.source_count,
          ErrorKind::Config, "corpus.val_source_count must lie in [1, source_count)");
  require(corpus.val_rir_fraction > 0 && corpus.val_rir_fraction < 1, ErrorKind::Config,
          "corpus.val_rir_fraction must lie in (0, 1)");
  require(model.d >= 1 && model.tau_init > 0 && model.tau_init <= 1, ErrorKind::Config,
          "model.d must be positive and model.tau_init in (0, 1]");
  require(pretrain.epochs >= 1 && pretrain.batch_size >= 2, ErrorKind::Config,
          "pretrain needs epochs >= 1 and batch_size >= 2");
  require(!finetune.encoders.empty(), ErrorKind::Config, "finetune.encoders is empty");
  finetune.head.validate();
  require(jobs >= 1, ErrorKind::Config, "jobs must be >= 1");
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") {
    c.catalog = catalog::desk_ranges();
    c.pretrain.lr = 3e-3;
    c.finetune.head.lr = 1e-2;
    return c;
  }
  if (name == "paper") {
    c.catalog = catalog::paper_ranges();
    c.rirs_per_class = 5000;
    c.corpus.source_count = 2000;
    c.corpus.val_source_count = 200;
    c.corpus.source_duration_s = 10.0;
    c.corpus.pairs_per_class = 5000;
    c.model.d = 768;
    c.model.rir_hidden = {3264, 2432, 1600};
    c.model.speech_frame_dim = 1024;
    c.model.speech_hidden = {1024};
    c.pretrain.epochs = 4;
    c.pretrain.batch_size = 55;
    c.pretrain.lr = 1e-5;
    c.finetune.head.lr = 1e-4;
    return c;
  }
  fail(ErrorKind::Config, "unknown preset '" + name + "' (expected paper or desk)");
}

Json to_json(const RunConfig& c) {
  Json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;

  Json cat;
  for (auto t : catalog::kRoomTypes) {
    const auto& r = c.catalog.types[static_cast<std::size_t>(t)];
    cat[catalog::to_string(t)] = {{"width", range_json(r.width)},
                                  {"depth", range_json(r.depth)},
                                  {"height", range_json(r.height)}};
  }
  cat["exclusions"] = Json::array();
  for (const auto& k : c.catalog.exclusions) {
    cat["exclusions"].push_back(Json::array(
        {catalog::to_string(k.type), k.width.meters(), k.depth.meters(), k.height.meters()}));
  }
  j["catalog"] = cat;

  const auto& a = c.acoustic;
  j["acoustic"] = {{"speed_of_sound", a.speed_of_sound},
                   {"sample_rate", a.sample_rate},
                   {"beta_min", a.beta_min},
                   {"beta_max", a.beta_max},
                   {"rir_length", a.rir_length},
                   {"min_wall_distance", a.min_wall_distance},
                   {"min_src_mic_distance", a.min_src_mic_distance},
                   {"max_image_order", a.max_image_order},
                   {"max_placement_attempts", a.max_placement_attempts}};
  j["bank"] = {{"rirs_per_class", c.rirs_per_class}};

  const auto& s = c.corpus.synth;
  j["corpus"] = {{"source_count", c.corpus.source_count},
                 {"source_duration_s", c.corpus.source_duration_s},
                 {"val_source_count", c.corpus.val_source_count},
                 {"val_rir_fraction", c.corpus.val_rir_fraction},
                 {"pairs_per_class", c.corpus.pairs_per_class},
                 {"wav_dir", c.corpus.wav_dir},
                 {"synth",
                  {{"spectral_tilt", s.spectral_tilt},
                   {"tilt_corner_hz", s.tilt_corner_hz},
                   {"syllable_min_s", s.syllable_min_s},
                   {"syllable_max_s", s.syllable_max_s},
                   {"gap_min_s", s.gap_min_s},
                   {"gap_max_s", s.gap_max_s},
                   {"peak", s.peak}}}};

  const auto& f = c.features;
  j["features"] = {{"rir_fft_size", f.rir_fft_size},
                   {"frame_length", f.frame_length},
                   {"hop", f.hop},
                   {"floor_db", f.floor_db},
                   {"max_clip_seconds", f.max_clip_seconds}};

  j["model"] = {{"d", c.model.d},
                {"rir_hidden", c.model.rir_hidden},
                {"speech_frame_dim", c.model.speech_frame_dim},
                {"speech_hidden", c.model.speech_hidden},
                {"tau_init", c.model.tau_init}};

  const auto& p = c.pretrain;
  j["pretrain"] = {{"epochs", p.epochs},
                   {"batch_size", p.batch_size},
                   {"lr", p.lr},
                   {"warmup_ratio", p.warmup_ratio},
                   {"weight_decay", p.weight_decay},
                   {"sampler", sampler_name(p.sampler)},
                   {"max_steps", p.max_steps}};

  Json encoders = Json::array();
  for (auto e : c.finetune.encoders) encoders.push_back(tasks::to_string(e));
  const auto& h = c.finetune.head;
  j["finetune"] = {{"encoders", encoders},
                   {"freeze_encoder", h.freeze_encoder},
                   {"epochs", h.epochs},
                   {"batch_size", h.batch_size},
                   {"lr", h.lr},
                   {"power", h.power},
                   {"weight_decay", h.weight_decay},
                   {"use_cache", h.use_cache}};

  const auto& b = c.baseline;
  j["baseline"] = {{"reference_widths", b.reference_widths},
                   {"reference_classes", b.reference_classes},
                   {"dropout", b.dropout},
                   {"lr", b.lr},
                   {"warmup_ratio", b.warmup_ratio},
                   {"epochs", b.epochs},
                   {"batch_size", b.batch_size},
                   {"weight_decay", b.weight_decay}};
  return j;
}

RunConfig config_from_json(const Json& json) {
  RunConfig c;
  Reader root(json, "");
  c.preset = root.string("preset");
  c.seed = static_cast<std::uint64_t>(root.integer("seed"));
  c.jobs = static_cast<int>(root.integer("jobs"));

  {
    Reader cat = root.object("catalog");
    for (auto t : catalog::kRoomTypes) {
      Reader r = cat.object(catalog::to_string(t));
      auto& tr = c.catalog.types[static_cast<std::size_t>(t)];
      tr.width = range_from(r.at("width"), r.where("width"));
      tr.depth = range_from(r.at("depth"), r.where("depth"));
      tr.height = range_from(r.at("height"), r.where("height"));
      r.finish();
    }
    const Json& ex = cat.at("exclusions");
    require(ex.is_array(), ErrorKind::Config, "catalog.exclusions must be an array");
    for (const auto& e : ex) {
      require(e.is_array() && e.size() == 4 && e[0].is_string() && e[1].is_number() &&
                  e[2].is_number() && e[3].is_number(),
              ErrorKind::Config, "catalog.exclusions entries are [type, width, depth, height]");
      c.catalog.exclusions.push_back({catalog::room_type_from_string(e[0].get<std::string>()),
                                      catalog::Length::from_meters(e[1].get<double>()),
                                      catalog::Length::from_meters(e[2].get<double>()),
                                      catalog::Length::from_meters(e[3].get<double>())});
    }
    cat.finish();
  }
  {
    Reader a = root.object("acoustic");
    c.acoustic.speed_of_sound = a.number("speed_of_sound");
    c.acoustic.sample_rate = a.number("sample_rate");
    c.acoustic.beta_min = a.number("beta_min");
    c.acoustic.beta_max = a.number("beta_max");
    c.acoustic.rir_length = a.count("rir_length");
    c.acoustic.min_wall_distance = a.number("min_wall_distance");
    c.acoustic.min_src_mic_distance = a.number("min_src_mic_distance");
    c.acoustic.max_image_order = static_cast<int>(a.integer("max_image_order"));
    c.acoustic.max_placement_attempts = static_cast<int>(a.integer("max_placement_attempts"));
    a.finish();
  }
  {
    Reader b = root.object("bank");
    c.rirs_per_class = b.count("rirs_per_class");
    b.finish();
  }
  {
    Reader r = root.object("corpus");
    c.corpus.source_count = r.count("source_count");
    c.corpus.source_duration_s = r.number("source_duration_s");
    c.corpus.val_source_count = r.count("val_source_count");
    c.corpus.val_rir_fraction = r.number("val_rir_fraction");
    c.corpus.pairs_per_class = r.count("pairs_per_class");
    c.corpus.wav_dir = r.string("wav_dir");
    Reader s = r.object("synth");
    auto& sy = c.corpus.synth;
    sy.spectral_tilt = s.boolean("spectral_tilt");
    sy.tilt_corner_hz = s.number("tilt_corner_hz");
    sy.syllable_min_s = s.number("syllable_min_s");
    sy.syllable_max_s = s.number("syllable_max_s");
    sy.gap_min_s = s.number("gap_min_s");
    sy.gap_max_s = s.number("gap_max_s");
    sy.peak = s.number("peak");
    s.finish();
    r.finish();
  }
  {
    Reader f = root.object("features");
    c.features.rir_fft_size = f.count("rir_fft_size");
    c.features.frame_length = f.count("frame_length");
    c.features.hop = f.count("hop");
    c.features.floor_db = f.number("floor_db");
    c.features.max_clip_seconds = f.number("max_clip_seconds");
    f.finish();
  }
  c.features.sample_rate = c.acoustic.sample_rate;
  {
    Reader m = root.object("model");
    c.model.d = m.count("d");
    c.model.rir_hidden = m.counts("rir_hidden");
    c.model.speech_frame_dim = m.count("speech_frame_dim");
    c.model.speech_hidden = m.counts("speech_hidden");
    c.model.tau_init = m.number("tau_init");
    m.finish();
  }
  {
    Reader p = root.object("pretrain");
    c.pretrain.epochs = p.count("epochs");
    c.pretrain.batch_size = p.count("batch_size");
    c.pretrain.lr = p.number("lr");
    c.pretrain.warmup_ratio = p.number("warmup_ratio");
    c.pretrain.weight_decay = p.number("weight_decay");
    c.pretrain.sampler = sampler_from(p.string("sampler"));
    c.pretrain.max_steps = p.count("max_steps");
    p.finish();
  }
  {
    Reader f = root.object("finetune");
    const Json& enc = f.at("encoders");
    require(enc.is_array(), ErrorKind::Config, "finetune.encoders must be an array");
    c.finetune.encoders.clear();
    for (const auto& e : enc) {
      require(e.is_string(), ErrorKind::Config, "finetune.encoders holds names");
      c.finetune.encoders.push_back(tasks::encoder_choice_from_string(e.get<std::string>()));
    }
    auto& h = c.finetune.head;
    h.freeze_encoder = f.boolean("freeze_encoder");
    h.epochs = f.count("epochs");
    h.batch_size = f.count("batch_size");
    h.lr = f.number("lr");
    h.power = f.number("power");
    h.weight_decay = f.number("weight_decay");
    h.use_cache = f.boolean("use_cache");
    f.finish();
  }
  {
    Reader b = root.object("baseline");
    auto& bl = c.baseline;
    bl.reference_widths = b.counts("reference_widths");
    bl.reference_classes = b.count("reference_classes");
    bl.dropout = b.number("dropout");
    bl.lr = b.number("lr");
    bl.warmup_ratio = b.number("warmup_ratio");
    bl.epochs = b.count("epochs");
    bl.batch_size = b.count("batch_size");
    bl.weight_decay = b.number("weight_decay");
    b.finish();
  }
  root.finish();
  c.validate();
  return c;
}

std::string config_hash(const RunConfig& config) {
  Json j = to_json(config);
  j.erase("jobs");
  return io::fnv1a_hex(j.dump());
}

std::string env_name(const std::string& dotted_key) {
  std::string out = "REVRIR_";
  for (char ch : dotted_key) {
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

ResolvedConfig resolve_config(const Overrides& o) {
  ResolvedConfig out;
  Json file_json;
  if (o.file) {
    std::ifstream in(*o.file);
    require(in.good(), ErrorKind::Config, "cannot open config file " + *o.file);
    try {
      file_json = Json::parse(in);
    } catch (const Json::exception& e) {
      fail(ErrorKind::Config, "malformed config file " + *o.file + ": " + e.what());
    }
    require(file_json.is_object(), ErrorKind::Config, "config file must hold a JSON object");
  }
  std::string preset = "desk";
  if (o.preset) {
    preset = *o.preset;
  } else if (file_json.contains("preset") && file_json["preset"].is_string()) {
    preset = file_json["preset"].get<std::string>();
  }
  Json j = to_json(preset_config(preset));
  out.log.push_back("preset " + preset);

  if (o.file) {
    // Files are partial: every leaf they give replaces the preset value.
    std::map<std::string, Json> leaves;
    collect_leaves(file_json, "", leaves);
    for (const auto& [key, value] : leaves) {
      if (key == "preset") continue;
      assign(j, key, value.is_string() ? value.get<std::string>() : value.dump(),
             "config file " + *o.file);
    }
    out.log.push_back("file " + *o.file);
  }

  std::map<std::string, std::string> env_keys;
  {
    std::map<std::string, Json> leaves;
    collect_leaves(j, "", leaves);
    for (const auto& [key, unused] : leaves) env_keys[env_name(key)] = key;
  }
  auto env = o.environment;
  std::sort(env.begin(), env.end());
  for (const auto& [name, value] : env) {
    if (name.rfind("REVRIR_", 0) != 0) continue;
    const auto it = env_keys.find(name);
    require(it != env_keys.end(), ErrorKind::Config,
            "environment variable " + name + " names no config key");
    assign(j, it->second, value, "environment " + name);
    out.log.push_back("env " + it->second + "=" + value);
  }

  for (const auto& a : o.assignments) {
    const auto eq = a.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::Config,
            "--set expects key=value, got '" + a + "'");
    assign(j, a.substr(0, eq), a.substr(eq + 1), "--set");
    out.log.push_back("set " + a);
  }
  if (o.seed) {
    j["seed"] = *o.seed;
    out.log.push_back("flag seed=" + std::to_string(*o.seed));
  }
  if (o.jobs) {
    j["jobs"] = *o.jobs;
    out.log.push_back("flag jobs=" + std::to_string(*o.jobs));
  }
  out.config = config_from_json(j);
  out.hash = config_hash(out.config);
  return out;
}

std::vector<std::pair<std::string, std::string>> process_environment() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return out;
}

}  // namespace revrir::app
