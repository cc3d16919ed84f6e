#pragma once

#include <string>
#include <vector>

#include "hydra/analysis.h"
#include "hydra/metrics.h"
#include "hydra/trainer.h"

namespace hydra {

// Process exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// File names written inside an output directory.
inline constexpr const char* kConfigDumpName = "config.txt";
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kTrainLogName = "train_log.jsonl";
inline constexpr const char* kBestCheckpointName = "best.ckpt";
inline constexpr const char* kFinalCheckpointName = "final.ckpt";
inline constexpr const char* kNanDumpName = "nan_dump.json";

// Writes train/val/test shards to the configured paths and a manifest (seeds,
// counts, content hashes) into out_dir. Returns the manifest JSON.
std::string cmd_gen_data(const RunConfig& cfg);

// Trains on train_path, validates on val_path. Writes the per-epoch log and
// both checkpoints into out_dir. On a non-finite loss the batch dump is
// written before the error propagates.
TrainResult cmd_train(const RunConfig& cfg);

// Scores a checkpoint on a dataset file under cfg.eval_protocol and writes
// the report JSON plus the per-predicate CSV into out_dir.
MetricsReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
                       const std::string& dataset);

AnalysisReport cmd_analyze(const RunConfig& cfg, const std::string& checkpoint,
                           const std::string& dataset);

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";  // error text when the cell failed
  std::size_t best_epoch = 0;
  MetricsReport report;
};

// One train + eval (best checkpoint on test_path) per value of
// cfg.sweep_param. A failing cell is recorded and the sweep moves on.
std::vector<SweepRow> cmd_sweep(const RunConfig& cfg);
std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows);

// Applies one sweep value to a copy of cfg; throws ConfigError for an unknown
// parameter.
RunConfig with_sweep_value(const RunConfig& cfg, const std::string& param, double value);

// Rescales the three split counts to the 57:5:26 train/val/test proportions
// over `total` scenes.
void apply_vg_split(RunConfig& cfg, std::size_t total);

// 64-bit FNV-1a.
std::uint64_t content_hash(const std::string& bytes);

}  // namespace hydra
