#pragma once

#include <span>

#include "hydra/geometry.h"
#include "hydra/matching.h"
#include "hydra/o2m.h"
#include "hydra/predictions.h"
#include "hydra/tensor.h"
#include "hydra/triplet.h"

namespace hydra {

struct LossWeights {
  double cls = 2.0;  // per entity role
  double rel = 2.0;
  double l1 = 5.0;
  double giou = 2.0;
  double ratio_o2m = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

enum class Branch { kO2O, kO2M };

struct LossBreakdown {
  double entity_cls = 0.0;
  double relation_cls = 0.0;
  double box_l1 = 0.0;
  double box_giou = 0.0;
  double total = 0.0;
  Branch branch = Branch::kO2O;

  LossBreakdown& operator+=(const LossBreakdown& o);
};

// -alpha_t (1 - p_t)^gamma log(p_t), with p_t clamped below at 1e-12.
double focal_loss(double prob, int target, double alpha, double gamma);

struct BoxLoss {
  double l1 = 0.0;
  double giou_loss = 0.0;
};
BoxLoss box_loss(const NormBox& pred, const NormBox& gt);

// Differentiable sums over rows of P x 4 center-format boxes.
Tensor box_l1_loss(const Tensor& pred, const Tensor& target);
Tensor box_giou_loss(const Tensor& pred, const Tensor& target);

struct BranchLoss {
  Tensor total;  // 1x1, on the tape
  LossBreakdown parts;
};

// Full triplet supervision for every (gt, query) pair; every other query is
// background (all-zero class targets). Normalized by max(1, pairs).
BranchLoss loss_o2o(const PredictionTensors& preds,
                    std::span<const GtTriplet> gts,
                    const O2OAssignment& assignment, const LossWeights& w);

// Same per-pair form as loss_o2o, scaled by w.ratio_o2m.
BranchLoss loss_o2m(const PredictionTensors& preds,
                    std::span<const GtTriplet> gts,
                    const O2MAssignment& assignment, const LossWeights& w);

enum class TrainMode {
  kBaselineO2O,    // one-to-one only
  kVanillaHybrid,  // one-to-one + one-to-many on the same predictions
  kHydraComplete,  // one-to-many on the self-attention-free branch
};

struct HydraLossConfig {
  TrainMode mode = TrainMode::kHydraComplete;
  HybridConfig assign;
  LossWeights weights;
};

struct HydraLoss {
  Tensor total;
  LossBreakdown o2o;
  LossBreakdown o2m;
  HybridAssignment assignment;
};

/// Assigns and scores one image.
///
/// `rel` are the main decoder's predictions; `hydra` the auxiliary branch's
/// (required for kHydraComplete, ignored otherwise).
HydraLoss loss_hydra(const PredictionTensors& rel,
                     const PredictionTensors* hydra,
                     std::span<const GtTriplet> gts,
                     const HydraLossConfig& cfg);

}  // namespace hydra
