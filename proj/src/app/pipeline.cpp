#include "revrir/app/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "revrir/baseline.hpp"
#include "revrir/binary_io.hpp"
#include "revrir/error.hpp"
#include "revrir/metrics.hpp"
#include "revrir/nn/checkpoint.hpp"
#include "revrir/wav.hpp"

namespace revrir::app {
namespace {

// Seed streams for the stages, all derived from the run seed.
enum : std::uint64_t {
  kBankStream = 0x62616e6b,
  kSourceStream = 0x73726373,
  kSplitStream = 0x73706c74,
  kDataStream = 0x64617461,
  kModelStream = 0x6d6f646c,
  kPretrainStream = 0x70726574,
  kHeadStream = 0x68656164,
  kBaselineStream = 0x62617365,
};

const std::string kHashPrefix = "# config_hash=";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path.string(), text);
}

std::string read_input(const fs::path& path, const std::string& producer) {
  require(fs::exists(path), ErrorKind::Data,
          "missing input " + path.string() + " (run '" + producer + "' first)");
  return io::read_file(path.string());
}

void check_hash(const std::string& found, const Context& ctx, const fs::path& what) {
  require(found == ctx.hash(), ErrorKind::Config,
          "config hash mismatch: " + what.string() + " was produced under " +
              (found.empty() ? std::string("<none>") : found) + ", current config is " +
              ctx.hash());
}

/// Hash from a "# config_hash=" line, or empty.
std::string embedded_hash(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(kHashPrefix, 0) == 0) return line.substr(kHashPrefix.size());
  }
  return {};
}

fs::path catalog_path(const Context& c) { return c.out / "catalog.txt"; }
fs::path bank_path(const Context& c) { return c.out / "rirs.bin"; }
fs::path manifest_path(const Context& c) { return c.out / "dataset.manifest"; }
fs::path pretrain_path(const Context& c) { return c.out / "pretrain.ckpt"; }
fs::path loss_path(const Context& c) { return c.out / "pretrain_loss.csv"; }
fs::path head_path(const Context& c, tasks::EncoderChoice e) {
  return c.out / ("head-" + std::string(tasks::to_string(e)) + ".ckpt");
}
fs::path finetune_metrics_path(const Context& c, tasks::EncoderChoice e) {
  return c.out / ("finetune-" + std::string(tasks::to_string(e)) + ".json");
}
fs::path baseline_ckpt_path(const Context& c) { return c.out / "baseline.ckpt"; }
fs::path baseline_metrics_path(const Context& c) { return c.out / "baseline.json"; }
fs::path metrics_path(const Context& c) { return c.out / "metrics.json"; }

Json run_record(const Context& ctx, const std::string& command, Json inputs, Json outputs,
                Json summary) {
  Json r;
  r["command"] = command;
  r["config_hash"] = ctx.hash();
  r["config"] = to_json(ctx.config());
  r["config_sources"] = ctx.resolved.log;
  r["inputs"] = std::move(inputs);
  r["outputs"] = std::move(outputs);
  r["summary"] = std::move(summary);
  write_text(ctx.out / "runs" / (command + ".json"), r.dump(2) + "\n");
  return r;
}

catalog::Catalog load_catalog(const Context& ctx) {
  const std::string text = read_input(catalog_path(ctx), "catalog");
  check_hash(embedded_hash(text), ctx, catalog_path(ctx));
  return catalog::catalog_from_string(text);
}

std::vector<sim::Rir> load_bank(const Context& ctx, const catalog::Catalog& cat) {
  read_input(bank_path(ctx), "gen-rirs");
  sim::RirBank bank = sim::load_rir_bank(bank_path(ctx).string());
  check_hash(bank.config_hash, ctx, bank_path(ctx));
  for (std::size_t i = 0; i < bank.rirs.size(); ++i) {
    const int c = bank.rirs[i].class_id;
    require(c >= 0 && static_cast<std::size_t>(c) < cat.size(), ErrorKind::Data,
            "RIR " + std::to_string(i) + " names a class outside the catalog");
  }
  sim::canonicalize(bank.rirs);
  return std::move(bank.rirs);
}

corpus::Dataset load_manifest(const Context& ctx) {
  const std::string text = read_input(manifest_path(ctx), "build-data");
  std::istringstream in(text);
  corpus::Dataset d = corpus::read_manifest(in);
  check_hash(d.config_hash, ctx, manifest_path(ctx));
  return d;
}

/// Unique clip RIRs of a split with their labels, in index order.
struct RirSet {
  std::vector<std::size_t> ids;
  std::vector<int> labels;
  std::vector<std::vector<double>> features;
};

/// Everything downstream of build-data, with speech features built lazily.
class Data {
 public:
  explicit Data(const Context& ctx)
      : ctx_(ctx), catalog(load_catalog(ctx)), bank(load_bank(ctx, catalog)),
        dataset(load_manifest(ctx)) {
    for (const auto* items : {&dataset.train, &dataset.val}) {
      for (const auto& it : *items) {
        require(it.clip_rir < bank.size() && it.paired_rir < bank.size(), ErrorKind::Data,
                "manifest references RIRs beyond the bank");
      }
    }
  }

  const RirSet& rirs(bool val) {
    auto& slot = val ? val_rirs_ : train_rirs_;
    if (!slot) {
      slot = std::make_unique<RirSet>();
      std::set<std::size_t> ids;
      for (const auto& it : val ? dataset.val : dataset.train) ids.insert(it.clip_rir);
      for (std::size_t id : ids) {
        slot->ids.push_back(id);
        slot->labels.push_back(bank[id].class_id);
        slot->features.push_back(joint::rir_features(bank[id], ctx_.config().features));
      }
    }
    return *slot;
  }

  const corpus::SplitFeatures& speech(bool val) {
    auto& slot = val ? val_speech_ : train_speech_;
    if (!slot) {
      slot = std::make_unique<corpus::SplitFeatures>(
          corpus::materialize(val ? dataset.val : dataset.train, dataset.sources, bank,
                              ctx_.config().features, ctx_.config().corpus.synth));
    }
    return *slot;
  }

 private:
  const Context& ctx_;

 public:
  catalog::Catalog catalog;
  std::vector<sim::Rir> bank;
  corpus::Dataset dataset;

 private:
  std::unique_ptr<RirSet> train_rirs_, val_rirs_;
  std::unique_ptr<corpus::SplitFeatures> train_speech_, val_speech_;
};

std::unique_ptr<joint::DualEncoder> make_model(const Context& ctx) {
  const auto& c = ctx.config();
  return std::make_unique<joint::DualEncoder>(c.speech_encoder(), c.rir_encoder(),
                                              c.model.tau_init,
                                              derive_seed(c.seed, kModelStream));
}

struct Pretrained {
  std::unique_ptr<joint::DualEncoder> model;
  std::string param_hash;
};

Pretrained load_pretrained(const Context& ctx) {
  read_input(pretrain_path(ctx), "pretrain");
  const nn::Checkpoint ck = nn::load_checkpoint(pretrain_path(ctx).string());
  const auto kind = ck.meta.find("kind");
  require(kind != ck.meta.end() && kind->second == "pretrain", ErrorKind::Format,
          pretrain_path(ctx).string() + " is not a pre-training checkpoint");
  const auto d = ck.meta.find("d");
  require(d != ck.meta.end() && d->second == std::to_string(ctx.config().model.d),
          ErrorKind::Validation,
          "checkpoint embedding dimension d=" + (d == ck.meta.end() ? "?" : d->second) +
              " does not match the configured head input d=" +
              std::to_string(ctx.config().model.d));
  const auto h = ck.meta.find("config_hash");
  check_hash(h == ck.meta.end() ? "" : h->second, ctx, pretrain_path(ctx));
  Pretrained p{make_model(ctx), nn::parameter_hash(ck)};
  nn::import_module(p.model->speech, "speech.", ck);
  nn::import_module(p.model->rir, "rir.", ck);
  nn::import_module(p.model->temperature, "temperature.", ck);
  p.model->set_training(false);
  return p;
}

joint::Encoder& tower(joint::DualEncoder& m, tasks::EncoderChoice e) {
  if (e == tasks::EncoderChoice::Speech) return m.speech;
  return m.rir;
}

/// Eval-mode embeddings of a frozen encoder, cached on disk by the hash of
/// the weights that produced them.
Matrix cached_embeddings(const Context& ctx, joint::Encoder& encoder, const std::string& weights,
                         const std::string& tag,
                         const std::function<const std::vector<std::vector<double>>&()>& inputs) {
  const std::string key = weights + "-" + tag;
  const fs::path path = ctx.out / "cache" / ("emb-" + key + ".ckpt");
  if (fs::exists(path)) {
    const nn::Checkpoint ck = nn::load_checkpoint(path.string());
    const auto* rec = ck.find("embeddings");
    const auto k = ck.meta.find("key");
    const auto h = ck.meta.find("config_hash");
    if (rec != nullptr && rec->shape.size() == 2 && k != ck.meta.end() && k->second == key &&
        h != ck.meta.end() && h->second == ctx.hash()) {
      Matrix m(rec->shape[0], rec->shape[1]);
      m.data = rec->values;
      return m;
    }
  }
  Matrix m = joint::embed_all(encoder, inputs());
  nn::Checkpoint ck;
  ck.meta = {{"kind", "embeddings"}, {"key", key}, {"config_hash", ctx.hash()}};
  ck.params.push_back({"embeddings", {m.rows, m.cols}, m.data});
  fs::create_directories(path.parent_path());
  nn::save_checkpoint(path.string(), ck);
  return m;
}

/// Inputs and labels of one modality for one split.
struct Modality {
  const std::vector<std::vector<double>>& inputs;
  const std::vector<int>& labels;
};

Modality modality(Data& data, tasks::EncoderChoice e, bool val) {
  if (e == tasks::EncoderChoice::Speech) {
    const auto& s = data.speech(val);
    return {s.pairs.speech, s.pairs.labels};
  }
  const auto& r = data.rirs(val);
  return {r.features, r.labels};
}

std::string split_tag(tasks::EncoderChoice e, bool val) {
  return std::string(tasks::to_string(e)) + (val ? "-val" : "-train");
}

Json history_json(const tasks::FinetuneResult& r) {
  Json h = Json::array();
  for (const auto& m : r.history) {
    h.push_back({{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"val_accuracy", m.val_accuracy}});
  }
  return h;
}

Json set_metrics(const std::vector<int>& pred, const std::vector<int>& labels,
                 const catalog::Catalog& cat) {
  const auto pt = tasks::collapse_to_types(pred, cat);
  const auto lt = tasks::collapse_to_types(labels, cat);
  const auto cm = tasks::confusion(pred, labels, cat.size(), tasks::room_names(cat));
  const auto ct = tasks::confusion(pt, lt, 3, tasks::type_names());
  auto matrix = [](const tasks::ConfusionMatrix& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      rows.push_back(std::vector<double>(m.values.row(i).begin(), m.values.row(i).end()));
    }
    return Json{{"classes", m.class_names}, {"rows", rows}, {"support", m.support}};
  };
  return {{"items", labels.size()},
          {"top1", tasks::top1_accuracy(pred, labels)},
          {"top1_types", tasks::top1_accuracy(pt, lt)},
          {"confusion", matrix(cm)},
          {"confusion_types", matrix(ct)}};
}

std::string predictions_csv(const Context& ctx, const std::vector<std::size_t>& items,
                            const std::vector<int>& labels, const std::vector<int>& pred) {
  std::string out = kHashPrefix + ctx.hash() + "\nitem,label,prediction\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(items[i]) + "," + std::to_string(labels[i]) + "," +
           std::to_string(pred[i]) + "\n";
  }
  return out;
}

void write_set_outputs(const Context& ctx, const std::string& name,
                       const std::vector<std::size_t>& items, const std::vector<int>& labels,
                       const std::vector<int>& pred, const catalog::Catalog& cat,
                       bool collapse_types, Json& outputs) {
  const fs::path pcsv = ctx.out / ("predictions-" + name + ".csv");
  write_text(pcsv, predictions_csv(ctx, items, labels, pred));
  tasks::ConfusionMatrix cm;
  if (collapse_types) {
    cm = tasks::confusion(tasks::collapse_to_types(pred, cat),
                          tasks::collapse_to_types(labels, cat), 3, tasks::type_names());
  } else {
    cm = tasks::confusion(pred, labels, cat.size(), tasks::room_names(cat));
  }
  const fs::path ccsv = ctx.out / ("confusion-" + name + ".csv");
  write_text(ccsv, confusion_csv(cm));
  outputs.push_back(pcsv.filename().string());
  outputs.push_back(ccsv.filename().string());
}

}  // namespace

std::string confusion_csv(const tasks::ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (const auto& n : cm.class_names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += cm.class_names[i];
    for (std::size_t j = 0; j < cm.size(); ++j) out += "," + fixed6(cm.values(i, j));
    out += "\n";
  }
  return out;
}

Json cmd_catalog(const Context& ctx) {
  const catalog::Catalog cat = catalog::enumerate_rooms(ctx.config().catalog);
  std::string text = catalog::catalog_to_string(cat);
  const auto nl = text.find('\n');
  text.insert(nl + 1, kHashPrefix + ctx.hash() + "\n");
  write_text(catalog_path(ctx), text);
  Json summary = {{"rooms", cat.size()},
                  {"small", cat.count(catalog::RoomType::Small)},
                  {"large", cat.count(catalog::RoomType::Large)},
                  {"hall", cat.count(catalog::RoomType::Hall)}};
  return run_record(ctx, "catalog", Json::object(), {"catalog.txt"}, summary);
}

Json cmd_gen_rirs(const Context& ctx) {
  const catalog::Catalog cat = load_catalog(ctx);
  const auto& c = ctx.config();
  sim::RirBank bank;
  bank.config_hash = ctx.hash();
  bank.rirs = sim::generate_rir_bank(cat, static_cast<int>(c.rirs_per_class),
                                     derive_seed(c.seed, kBankStream), c.acoustic, c.jobs);
  sim::save_rir_bank(bank_path(ctx).string(), bank);
  return run_record(ctx, "gen-rirs", {{"catalog.txt", ctx.hash()}}, {"rirs.bin"},
                    {{"rirs", bank.rirs.size()}, {"per_class", c.rirs_per_class}});
}

Json cmd_build_data(const Context& ctx) {
  const catalog::Catalog cat = load_catalog(ctx);
  const std::vector<sim::Rir> bank = load_bank(ctx, cat);
  const auto& c = ctx.config();

  std::vector<corpus::SourceRef> sources;
  if (!c.corpus.wav_dir.empty()) {
    require(fs::is_directory(c.corpus.wav_dir), ErrorKind::Data,
            "corpus.wav_dir " + c.corpus.wav_dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(c.corpus.wav_dir)) {
      if (entry.path().extension() == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string id = f.stem().string();
      std::replace_if(id.begin(), id.end(), [](unsigned char ch) { return std::isspace(ch); }, '_');
      const corpus::Utterance u = corpus::make_utterance(corpus::load_wav(f.string()), id);
      corpus::SourceRef s;
      s.id = u.source_id;
      s.wav_path = fs::absolute(f).string();
      s.duration_s = u.signal.duration();
      sources.push_back(std::move(s));
    }
    require(!sources.empty(), ErrorKind::Data, "no .wav files in " + c.corpus.wav_dir);
  } else {
    sources = corpus::synthetic_sources(c.corpus.source_count, c.corpus.source_duration_s,
                                        derive_seed(c.seed, kSourceStream));
  }
  const auto policy = corpus::make_split_policy(bank, cat.size(), sources.size(),
                                                c.corpus.val_rir_fraction,
                                                c.corpus.val_source_count,
                                                derive_seed(c.seed, kSplitStream));
  corpus::Dataset ds = corpus::build_dataset(cat, bank, sources, policy, c.corpus.pairs_per_class,
                                             derive_seed(c.seed, kDataStream));
  ds.config_hash = ctx.hash();
  std::ostringstream out;
  corpus::write_manifest(out, ds);
  write_text(manifest_path(ctx), out.str());
  return run_record(ctx, "build-data", {{"catalog.txt", ctx.hash()}, {"rirs.bin", ctx.hash()}},
                    {"dataset.manifest"},
                    {{"sources", sources.size()},
                     {"train_items", ds.train.size()},
                     {"val_items", ds.val.size()}});
}

Json cmd_pretrain(const Context& ctx) {
  Data data(ctx);
  const auto& c = ctx.config();
  auto model = make_model(ctx);
  joint::PretrainConfig pc = c.pretrain;
  pc.seed = derive_seed(c.seed, kPretrainStream);
  const auto result = joint::pretrain(*model, data.speech(false).pairs, data.speech(true).pairs, pc);

  nn::Checkpoint ck;
  ck.meta = {{"kind", "pretrain"},
             {"config_hash", ctx.hash()},
             {"d", std::to_string(c.model.d)},
             {"tau", fmt(model->temperature.value())},
             {"initial_train_loss", fmt(result.initial_train_loss)},
             {"final_train_loss", fmt(result.final_train_loss)},
             {"steps", std::to_string(result.steps)}};
  nn::export_module(model->speech, "speech.", ck);
  nn::export_module(model->rir, "rir.", ck);
  nn::export_module(model->temperature, "temperature.", ck);
  nn::save_checkpoint(pretrain_path(ctx).string(), ck);

  std::string csv = kHashPrefix + ctx.hash() + "\nstep,split,loss\n";
  for (const auto& p : result.curve) {
    csv += std::to_string(p.step) + "," + p.split + "," + fmt(p.loss) + "\n";
  }
  write_text(loss_path(ctx), csv);
  return run_record(ctx, "pretrain", {{"dataset.manifest", ctx.hash()}},
                    {"pretrain.ckpt", "pretrain_loss.csv"},
                    {{"steps", result.steps},
                     {"initial_train_loss", result.initial_train_loss},
                     {"final_train_loss", result.final_train_loss},
                     {"tau", model->temperature.value()},
                     {"parameter_hash", nn::parameter_hash(ck)}});
}

Json cmd_finetune(const Context& ctx) {
  Data data(ctx);
  const auto& c = ctx.config();
  Json outputs = Json::array();
  Json summary = Json::object();

  for (const auto e : c.finetune.encoders) {
    // A fresh copy of the pre-trained towers per head, so an unfrozen run
    // does not leak into the next one.
    Pretrained local = load_pretrained(ctx);
    joint::Encoder& enc = tower(*local.model, e);
    tasks::FinetuneConfig fc = c.finetune.head;
    fc.encoder = e;
    fc.seed = derive_seed(c.seed, kHeadStream, static_cast<std::uint64_t>(e));
    Rng rng(derive_seed(fc.seed, 1));
    tasks::ClassifierHead head(c.model.d, data.catalog.size(), rng);

    tasks::FinetuneResult result;
    if (fc.freeze_encoder && fc.use_cache) {
      const Matrix tr = cached_embeddings(ctx, enc, local.param_hash, split_tag(e, false),
                                          [&]() -> const auto& { return modality(data, e, false).inputs; });
      const Matrix va = cached_embeddings(ctx, enc, local.param_hash, split_tag(e, true),
                                          [&]() -> const auto& { return modality(data, e, true).inputs; });
      result = tasks::finetune_head(head, tr, modality(data, e, false).labels, va,
                                    modality(data, e, true).labels, fc);
    } else {
      const Modality tr = modality(data, e, false);
      const Modality va = modality(data, e, true);
      result = tasks::finetune(enc, head, {tr.inputs, tr.labels}, {va.inputs, va.labels}, fc);
    }

    nn::Checkpoint ck;
    ck.meta = {{"kind", "head"},
               {"config_hash", ctx.hash()},
               {"encoder", tasks::to_string(e)},
               {"frozen", fc.freeze_encoder ? "true" : "false"},
               {"d", std::to_string(c.model.d)},
               {"classes", std::to_string(data.catalog.size())},
               {"pretrain_parameter_hash", local.param_hash}};
    nn::export_module(head, "head.", ck);
    if (!fc.freeze_encoder) nn::export_module(enc, "encoder.", ck);
    nn::save_checkpoint(head_path(ctx, e).string(), ck);

    Json m = {{"config_hash", ctx.hash()},
              {"encoder", tasks::to_string(e)},
              {"frozen", fc.freeze_encoder},
              {"steps", result.steps},
              {"history", history_json(result)}};
    write_text(finetune_metrics_path(ctx, e), m.dump(2) + "\n");
    outputs.push_back(head_path(ctx, e).filename().string());
    outputs.push_back(finetune_metrics_path(ctx, e).filename().string());
    summary[tasks::to_string(e)] = {
        {"final_val_accuracy", result.history.empty() ? 0.0 : result.history.back().val_accuracy}};
  }
  return run_record(ctx, "finetune",
                    {{"dataset.manifest", ctx.hash()}, {"pretrain.ckpt", ctx.hash()}}, outputs,
                    summary);
}

Json cmd_baseline(const Context& ctx) {
  Data data(ctx);
  const auto& c = ctx.config();
  auto gather = [&](bool val) {
    const RirSet& s = data.rirs(val);
    std::vector<sim::Rir> rirs;
    for (std::size_t id : s.ids) rirs.push_back(data.bank[id]);
    return tasks::baseline_feature_matrix(rirs, c.jobs);
  };
  const Matrix tr = gather(false);
  const Matrix va = gather(true);
  tasks::BaselineConfig bc = c.baseline;
  bc.seed = derive_seed(c.seed, kBaselineStream);
  tasks::BaselineClassifier model(data.catalog.size(), bc);
  const auto result =
      tasks::baseline_train_eval(model, tr, data.rirs(false).labels, va, data.rirs(true).labels, bc);

  nn::Checkpoint ck;
  ck.meta = {{"kind", "baseline"},
             {"config_hash", ctx.hash()},
             {"classes", std::to_string(data.catalog.size())}};
  nn::export_module(model, "baseline.", ck);
  nn::save_checkpoint(baseline_ckpt_path(ctx).string(), ck);
  Json m = {{"config_hash", ctx.hash()},
            {"widths", tasks::baseline_widths(data.catalog.size(), bc)},
            {"epoch_losses", result.epoch_losses},
            {"val_accuracy", result.accuracy}};
  write_text(baseline_metrics_path(ctx), m.dump(2) + "\n");
  return run_record(ctx, "baseline", {{"dataset.manifest", ctx.hash()}},
                    {"baseline.ckpt", "baseline.json"}, {{"val_accuracy", result.accuracy}});
}

namespace {

Json evaluate_external(const Context& ctx, const EvaluateOptions& opt) {
  const catalog::Catalog cat = load_catalog(ctx);
  const std::string text = read_input(*opt.predictions, "an external scorer");
  const std::string h = embedded_hash(text);
  if (!h.empty()) check_hash(h, ctx, *opt.predictions);
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<std::size_t> items;
  std::vector<int> labels, pred;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      require(line == "item,label,prediction", ErrorKind::Format,
              "predictions CSV must start with 'item,label,prediction'");
      header = true;
      continue;
    }
    std::size_t item = 0;
    int l = 0, p = 0;
    char extra = 0;
    require(std::sscanf(line.c_str(), "%zu,%d,%d%c", &item, &l, &p, &extra) == 3,
            ErrorKind::Format, "malformed predictions row at line " + std::to_string(lineno));
    items.push_back(item);
    labels.push_back(l);
    pred.push_back(p);
  }
  require(!labels.empty(), ErrorKind::Validation, "predictions CSV holds no rows");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int v : {labels[i], pred[i]}) {
      require(v >= 0 && static_cast<std::size_t>(v) < cat.size(), ErrorKind::Validation,
              "class id " + std::to_string(v) + " outside the catalog");
    }
  }
  Json metrics = {{"config_hash", ctx.hash()},
                  {"classes", cat.size()},
                  {"models", {{"external", {{"predictions", set_metrics(pred, labels, cat)}}}}}};
  Json outputs = Json::array({"metrics.json"});
  write_set_outputs(ctx, "external", items, labels, pred, cat, opt.collapse_types,
                    outputs);
  write_text(metrics_path(ctx), metrics.dump(2) + "\n");
  return run_record(ctx, "evaluate", {{opt.predictions->filename().string(), h}}, outputs,
                    {{"top1", metrics["models"]["external"]["predictions"]["top1"]},
                     {"top1_types", metrics["models"]["external"]["predictions"]["top1_types"]}});
}

}  // namespace

Json cmd_evaluate(const Context& ctx, const EvaluateOptions& opt) {
  if (opt.predictions) return evaluate_external(ctx, opt);
  Data data(ctx);
  const auto& c = ctx.config();
  Pretrained pre = load_pretrained(ctx);
  Json inputs = {{"dataset.manifest", ctx.hash()}, {"pretrain.ckpt", ctx.hash()}};
  Json outputs = Json::array({"metrics.json"});
  Json models = Json::object();
  Json summary = Json::object();

  const std::vector<std::pair<tasks::EncoderChoice, std::string>> sets = {
      {tasks::EncoderChoice::Speech, "speech_set"}, {tasks::EncoderChoice::Rir, "rir_set"}};
  auto items_of = [&](tasks::EncoderChoice set) {
    std::vector<std::size_t> items;
    if (set == tasks::EncoderChoice::Speech) {
      for (std::size_t i = 0; i < data.dataset.val.size(); ++i) items.push_back(i);
    } else {
      items = data.rirs(true).ids;
    }
    return items;
  };

  for (const auto e : {tasks::EncoderChoice::Speech, tasks::EncoderChoice::Rir}) {
    const fs::path hp = head_path(ctx, e);
    if (!fs::exists(hp)) continue;
    const nn::Checkpoint ck = nn::load_checkpoint(hp.string());
    const auto hh = ck.meta.find("config_hash");
    check_hash(hh == ck.meta.end() ? "" : hh->second, ctx, hp);
    inputs[hp.filename().string()] = ctx.hash();
    Rng unused(0);
    tasks::ClassifierHead head(c.model.d, data.catalog.size(), unused);
    nn::import_module(head, "head.", ck);
    const bool frozen = ck.meta.count("frozen") && ck.meta.at("frozen") == "true";

    const std::string name = std::string(tasks::to_string(e)) + (frozen ? "_frozen" : "_unfrozen");
    Json model_metrics = Json::object();
    for (const auto& [set, set_name] : sets) {
      // A fine-tuned (unfrozen) encoder is only meaningful on its own modality.
      if (!frozen && set != e) continue;
      Matrix emb;
      if (frozen) {
        emb = cached_embeddings(ctx, tower(*pre.model, set), pre.param_hash, split_tag(set, true),
                                [&]() -> const auto& { return modality(data, set, true).inputs; });
      } else {
        Pretrained local = load_pretrained(ctx);
        nn::import_module(tower(*local.model, e), "encoder.", ck);
        emb = joint::embed_all(tower(*local.model, e), modality(data, set, true).inputs);
      }
      const std::vector<int> pred = tasks::predict(head, emb);
      const std::vector<int>& labels = modality(data, set, true).labels;
      model_metrics[set_name] = set_metrics(pred, labels, data.catalog);
      write_set_outputs(ctx, name + "-" + set_name, items_of(set), labels,
                        pred, data.catalog, opt.collapse_types, outputs);
      summary[name + "." + set_name] = {{"top1", model_metrics[set_name]["top1"]},
                                        {"top1_types", model_metrics[set_name]["top1_types"]}};
    }
    const fs::path fm = finetune_metrics_path(ctx, e);
    if (fs::exists(fm)) model_metrics["finetune_history"] = Json::parse(io::read_file(fm.string()))["history"];
    models[name] = model_metrics;
  }

  if (fs::exists(baseline_ckpt_path(ctx))) {
    const nn::Checkpoint ck = nn::load_checkpoint(baseline_ckpt_path(ctx).string());
    const auto hh = ck.meta.find("config_hash");
    check_hash(hh == ck.meta.end() ? "" : hh->second, ctx, baseline_ckpt_path(ctx));
    inputs["baseline.ckpt"] = ctx.hash();
    tasks::BaselineClassifier model(data.catalog.size(), c.baseline);
    nn::import_module(model, "baseline.", ck);
    model.set_training(false);
    const RirSet& val = data.rirs(true);
    std::vector<sim::Rir> rirs;
    for (std::size_t id : val.ids) rirs.push_back(data.bank[id]);
    const std::vector<int> pred = model.predict(tasks::baseline_feature_matrix(rirs, c.jobs));
    Json bm = {{"rir_set", set_metrics(pred, val.labels, data.catalog)}};
    write_set_outputs(ctx, "baseline-rir_set", val.ids, val.labels, pred,
                      data.catalog, opt.collapse_types, outputs);
    summary["baseline.rir_set"] = {{"top1", bm["rir_set"]["top1"]},
                                   {"top1_types", bm["rir_set"]["top1_types"]}};
    models["baseline"] = bm;
  }
  require(!models.empty(), ErrorKind::Data,
          "nothing to evaluate: run 'finetune' or 'baseline' first");

  Json pretrain_meta = Json::object();
  {
    const nn::Checkpoint ck = nn::load_checkpoint(pretrain_path(ctx).string());
    for (const char* k : {"initial_train_loss", "final_train_loss", "tau", "steps"}) {
      const auto it = ck.meta.find(k);
      if (it != ck.meta.end()) pretrain_meta[k] = std::stod(it->second);
    }
  }
  Json metrics = {{"config_hash", ctx.hash()},
                  {"classes", data.catalog.size()},
                  {"class_names", tasks::room_names(data.catalog)},
                  {"type_names", tasks::type_names()},
                  {"pretrain", pretrain_meta},
                  {"models", models}};
  write_text(metrics_path(ctx), metrics.dump(2) + "\n");
  return run_record(ctx, "evaluate", inputs, outputs, summary);
}

Json cmd_report(const Context& ctx, const std::vector<fs::path>& extra_runs) {
  auto load_metrics = [&](const fs::path& dir) {
    const fs::path p = dir / "metrics.json";
    return Json::parse(read_input(p, "evaluate"));
  };
  const Json metrics = load_metrics(ctx.out);
  check_hash(metrics.value("config_hash", ""), ctx, metrics_path(ctx));
  const fs::path dir = ctx.out / "report";
  Json outputs = Json::array();

  if (fs::exists(loss_path(ctx))) {
    const std::string text = io::read_file(loss_path(ctx).string());
    check_hash(embedded_hash(text), ctx, loss_path(ctx));
    std::string train = "step,loss\n", val = "step,loss\n";
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line == "step,split,loss") continue;
      const auto a = line.find(',');
      const auto b = line.find(',', a + 1);
      const std::string split = line.substr(a + 1, b - a - 1);
      (split == "train" ? train : val) += line.substr(0, a) + "," + line.substr(b + 1) + "\n";
    }
    write_text(dir / "loss_train.csv", train);
    write_text(dir / "loss_val.csv", val);
    outputs.push_back("report/loss_train.csv");
    outputs.push_back("report/loss_val.csv");
  }

  std::string md = "# Evaluation report\n\nconfig hash: " + ctx.hash() + "\n\n";
  md += "| model | set | items | top-1 | top-1 (types) |\n|---|---|---|---|---|\n";
  std::string tables;
  for (const auto& [model, sets] : metrics["models"].items()) {
    for (const auto& [set, m] : sets.items()) {
      if (!m.is_object() || !m.contains("top1")) continue;
      md += "| " + model + " | " + set + " | " + std::to_string(m["items"].get<std::size_t>()) +
            " | " + fixed6(m["top1"].get<double>()) + " | " +
            fixed6(m["top1_types"].get<double>()) + " |\n";
      for (const char* level : {"confusion_types", "confusion"}) {
        const Json& cm = m[level];
        tables += "\n### " + model + " / " + set + " / " + level + "\n\n| true \\ predicted |";
        for (const auto& n : cm["classes"]) tables += " " + n.get<std::string>() + " |";
        tables += "\n|---|";
        for (std::size_t j = 0; j < cm["classes"].size(); ++j) tables += "---|";
        tables += "\n";
        for (std::size_t i = 0; i < cm["rows"].size(); ++i) {
          tables += "| " + cm["classes"][i].get<std::string>() +
                    (cm["support"][i].get<std::size_t>() == 0 ? " (no items)" : "") + " |";
          for (const auto& v : cm["rows"][i]) tables += " " + fixed6(v.get<double>()) + " |";
          tables += "\n";
        }
      }
    }
    if (sets.contains("finetune_history")) {
      std::string csv = "epoch,train_loss,val_accuracy\n";
      for (const auto& h : sets["finetune_history"]) {
        csv += std::to_string(h["epoch"].get<std::size_t>()) + "," +
               fmt(h["train_loss"].get<double>()) + "," + fmt(h["val_accuracy"].get<double>()) +
               "\n";
      }
      write_text(dir / ("finetune_" + model + ".csv"), csv);
      outputs.push_back("report/finetune_" + model + ".csv");
    }
  }
  write_text(dir / "report.md", md + "\n## Confusion matrices\n" + tables);
  outputs.push_back("report/report.md");

  if (!extra_runs.empty()) {
    std::vector<Json> runs = {metrics};
    for (const auto& r : extra_runs) runs.push_back(load_metrics(r));
    std::map<std::string, std::vector<double>> top1, types;
    for (const auto& run : runs) {
      for (const auto& [model, sets] : run["models"].items()) {
        for (const auto& [set, m] : sets.items()) {
          if (!m.is_object() || !m.contains("top1")) continue;
          top1[model + "," + set].push_back(m["top1"].get<double>());
          types[model + "," + set].push_back(m["top1_types"].get<double>());
        }
      }
    }
    std::string csv = "model,set,runs,top1_mean,top1_std,top1_types_mean,top1_types_std\n";
    for (const auto& [key, v] : top1) {
      const auto a = tasks::mean_std(v);
      const auto b = tasks::mean_std(types[key]);
      csv += key + "," + std::to_string(v.size()) + "," + fixed6(a.mean) + "," + fixed6(a.stddev) +
             "," + fixed6(b.mean) + "," + fixed6(b.stddev) + "\n";
    }
    write_text(dir / "seeds.csv", csv);
    outputs.push_back("report/seeds.csv");
  }
  return run_record(ctx, "report", {{"metrics.json", ctx.hash()}}, outputs,
                    {{"runs", 1 + extra_runs.size()}});
}

}  // namespace revrir::app
