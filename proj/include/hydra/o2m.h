#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "hydra/matching.h"
#include "hydra/triplet.h"

namespace hydra {

/// M x N matrix of one-to-many scores, each in [0, 4].
using O2MScoreMatrix = CostMatrix;

struct O2MPair {
  std::size_t gt = 0;
  std::size_t query = 0;
  double score = 0.0;  // raw score, before any normalization
  bool operator==(const O2MPair&) const = default;
};

struct O2MAssignment {
  std::vector<O2MPair> pairs;  // grouped by gt, best first within a gt
  std::vector<std::size_t> per_gt_counts;
};

enum class ThresholdMode {
  kRaw,         // compare the raw [0,4] score against the threshold
  kNormalized,  // compare score / 4
};

struct O2MConfig {
  double threshold = 0.4;
  std::size_t k = 6;
  ThresholdMode mode = ThresholdMode::kRaw;
};

// p_sub[c_sub] + p_obj[c_obj] + IoU(sub boxes) + IoU(obj boxes).
double score_o2m(const GtTriplet& gt, const PredTriplet& pred);

O2MScoreMatrix score_matrix(std::span<const GtTriplet> gts,
                            std::span<const PredTriplet> preds);

/// Threshold + top-k selection on a precomputed score matrix.
///
/// Per ground truth, entries whose (possibly normalized) score is strictly
/// above the threshold are ranked by score, ties to the lower query, and the
/// best k kept. A query picked by several ground truths stays only with the
/// one scoring it highest (ties to the lower gt index).
O2MAssignment select_o2m(const O2MScoreMatrix& scores, const O2MConfig& cfg);

O2MAssignment assign_o2m(std::span<const GtTriplet> gts,
                         std::span<const PredTriplet> preds,
                         const O2MConfig& cfg);

struct HybridConfig {
  CostWeights cost;
  O2MConfig o2m;
  bool o2m_enabled = true;
};

struct HybridAssignment {
  O2OAssignment o2o;
  O2MAssignment o2m;
  std::size_t positives_total = 0;  // o2o pairs + o2m pairs
};

// One-to-one on `preds_o2o`, one-to-many on `preds_o2m`. The vanilla model
// passes the same predictions twice.
HybridAssignment assign_hybrid(std::span<const GtTriplet> gts,
                               std::span<const PredTriplet> preds_o2o,
                               std::span<const PredTriplet> preds_o2m,
                               const HybridConfig& cfg);

struct ImagePositives {
  std::size_t o2o = 0;
  std::size_t o2m = 0;
  std::size_t hybrid = 0;
};

struct PositiveStats {
  std::vector<ImagePositives> per_image;
  double mean_o2o = 0.0;
  double mean_o2m = 0.0;
  double mean_hybrid = 0.0;
  // 100 * (mean_hybrid / mean_o2o - 1); 0 when there are no o2o positives.
  double increase_pct = 0.0;
};

PositiveStats count_positives(std::span<const HybridAssignment> assignments);

}  // namespace hydra
