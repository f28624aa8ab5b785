#pragma once

// The operator commands. Each one reads its inputs from the output
// directory, refuses inputs produced under a different config hash, writes
// its artifacts plus a run record (runs/<command>.json) and returns that
// record.
//
// Artifacts, all relative to the output directory:
//   catalog.txt            catalog
//   rirs.bin               RIR bank
//   dataset.manifest       build-data
//   pretrain.ckpt          pretrain (both towers and the temperature)
//   pretrain_loss.csv      pretrain (step, split, loss)
//   head-<enc>.ckpt        finetune, one per encoder
//   finetune-<enc>.json    finetune per-epoch metrics
//   baseline.ckpt/.json    baseline
//   metrics.json           evaluate, plus confusion-*.csv, predictions-*.csv
//   report/                report
//   cache/                 embeddings keyed by checkpoint hash

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "revrir/app/config.hpp"
#include "revrir/metrics.hpp"

namespace revrir::app {

namespace fs = std::filesystem;

struct Context {
  ResolvedConfig resolved;
  fs::path out;

  const RunConfig& config() const { return resolved.config; }
  const std::string& hash() const { return resolved.hash; }
};

struct EvaluateOptions {
  /// Confusion CSVs at room-type level (3 x 3) instead of room level.
  bool collapse_types = false;
  /// Score an external predictions CSV (item,label,prediction) instead of
  /// the trained models.
  std::optional<fs::path> predictions;
};

Json cmd_catalog(const Context& ctx);
Json cmd_gen_rirs(const Context& ctx);
Json cmd_build_data(const Context& ctx);
Json cmd_pretrain(const Context& ctx);
Json cmd_finetune(const Context& ctx);
Json cmd_baseline(const Context& ctx);
Json cmd_evaluate(const Context& ctx, const EvaluateOptions& options);
/// Renders the metrics of this run (and of `extra_runs`, for a mean/std
/// table across seeds) into report/.
Json cmd_report(const Context& ctx, const std::vector<fs::path>& extra_runs);

/// Confusion matrix as CSV with a header row of class names.
std::string confusion_csv(const tasks::ConfusionMatrix& cm);

}  // namespace revrir::app
