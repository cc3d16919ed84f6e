#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydra/decoder.h"
#include "hydra/losses.h"
#include "hydra/metrics.h"
#include "hydra/optim.h"
#include "hydra/synthdata.h"

namespace hydra {

// Bad key, bad value, or inconsistent settings.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every knob of a run, in flat key=value form.
struct RunConfig {
  TrainMode mode = TrainMode::kHydraComplete;
  std::uint64_t seed = 0;
  std::size_t epochs = 12;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  bool aux_loss = true;  // supervise every decoder layer
  double grad_clip = 0.1;  // global L2 norm; 0 disables

  DecoderConfig model;
  LossWeights loss;
  CostWeights cost;
  O2MConfig o2m;

  Protocol eval_protocol = Protocol::kVisualGenome;
  // Validation images scored after each epoch; 0 uses the whole split.
  std::size_t eval_limit = 0;

  std::string train_path = "data/train.jsonl";
  std::string val_path = "data/val.jsonl";
  std::string test_path = "data/test.jsonl";
  std::string out_dir = "runs/default";

  // Data generation (gen-data).
  GenSpec gen;
  std::uint64_t data_seed = 1;
  std::size_t train_count = 500;
  std::size_t val_count = 100;
  std::size_t test_count = 100;

  // Sweep.
  std::string sweep_param;  // T, n_queries, ratio, epochs
  std::vector<double> sweep_values;

  // Applies one "key=value"; throws ConfigError.
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);
  // Checks cross-field consistency; throws ConfigError.
  void validate() const;
  // All resolved keys, one per line, in a fixed order.
  std::string dump() const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
};

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);

// Stream seed for one named component of a run.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& component);

/// Per-epoch training record.
struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  double loss_total = 0.0;  // mean per image
  LossBreakdown o2o;        // summed over layers, mean per image
  LossBreakdown o2m;
  // Mean positives per image at the final decoder layer.
  double positives_o2o = 0.0;
  double positives_o2m = 0.0;
  double positives_hybrid = 0.0;
  std::array<double, 3> val_recall{};
  std::array<double, 3> val_mean_recall{};

  std::string to_json() const;
};

// Thrown when a step produces a non-finite loss.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  // JSON diagnostic of the offending batch.
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

struct TrainResult {
  RelationModel best;   // highest validation mR@50 (first epoch on ties)
  RelationModel final;  // after the last epoch
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  std::vector<EpochLog> log;
};

// Called after each epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochLog&)>;

TrainResult train(const RunConfig& cfg, std::span<const SceneSample> train_set,
                  std::span<const SceneSample> val_set,
                  const EpochCallback& on_epoch = {});

// One scene's inputs and targets for a loss evaluation.
HydraLoss image_loss(const RelationModel& model, const SceneSample& scene,
                     const RunConfig& cfg, bool aux_loss);

std::vector<EvalImage> eval_images(const RelationModel& model,
                                   std::span<const SceneSample> dataset,
                                   Protocol protocol);

MetricsReport evaluate_model(const RelationModel& model,
                             std::span<const SceneSample> dataset,
                             Protocol protocol);

// Mean positives per image under `cfg` with the model frozen.
PositiveStats measure_positives(const RelationModel& model,
                                std::span<const SceneSample> dataset,
                                const RunConfig& cfg);

}  // namespace hydra
