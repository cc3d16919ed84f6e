#include "hydra/losses.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "hydra/ops.h"

namespace hydra {

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  entity_cls += o.entity_cls;
  relation_cls += o.relation_cls;
  box_l1 += o.box_l1;
  box_giou += o.box_giou;
  total += o.total;
  return *this;
}

double focal_loss(double prob, int target, double alpha, double gamma) {
  constexpr double kEps = 1e-12;
  const double pt = target == 1 ? prob : 1.0 - prob;
  const double alpha_t = target == 1 ? alpha : 1.0 - alpha;
  return -alpha_t * std::pow(1.0 - pt, gamma) * std::log(std::max(pt, kEps));
}

BoxLoss box_loss(const NormBox& pred, const NormBox& gt) {
  return {l1_distance(pred, gt), 1.0 - giou(pred, gt)};
}

Tensor box_l1_loss(const Tensor& pred, const Tensor& target) {
  return sum(abs(pred - target));
}

Tensor box_giou_loss(const Tensor& pred, const Tensor& target) {
  auto col = [](const Tensor& t, std::size_t c) { return slice_cols(t, c, c + 1); };
  auto corners = [&](const Tensor& t) {
    Tensor cx = col(t, 0), cy = col(t, 1);
    Tensor hw = scale(col(t, 2), 0.5), hh = scale(col(t, 3), 0.5);
    return std::array<Tensor, 4>{cx - hw, cy - hh, cx + hw, cy + hh};
  };
  const auto p = corners(pred);
  const auto g = corners(target);
  Tensor iw = relu(minimum(p[2], g[2]) - maximum(p[0], g[0]));
  Tensor ih = relu(minimum(p[3], g[3]) - maximum(p[1], g[1]));
  Tensor inter = iw * ih;
  Tensor area_p = (p[2] - p[0]) * (p[3] - p[1]);
  Tensor area_g = (g[2] - g[0]) * (g[3] - g[1]);
  Tensor uni = area_p + area_g - inter;
  Tensor ew = maximum(p[2], g[2]) - minimum(p[0], g[0]);
  Tensor eh = maximum(p[3], g[3]) - minimum(p[1], g[1]);
  Tensor enclosing = ew * eh;
  Tensor giou_v = inter / uni - (enclosing - uni) / enclosing;
  return sum(add_scalar(neg(giou_v), 1.0));
}

namespace {

struct Supervision {
  std::size_t gt;
  std::size_t query;
};

BranchLoss supervised(const PredictionTensors& preds,
                      std::span<const GtTriplet> gts,
                      const std::vector<Supervision>& pairs,
                      const LossWeights& w, double branch_scale,
                      Branch branch) {
  const std::size_t n = preds.size();
  const std::size_t n_ent = preds.sub_logits.cols();
  const std::size_t n_rel = preds.rel_logits.cols();
  std::vector<double> sub_t(n * n_ent, 0.0), obj_t(n * n_ent, 0.0),
      rel_t(n * n_rel, 0.0);
  std::vector<std::size_t> queries;
  std::vector<double> sub_gt, obj_gt;
  for (const Supervision& s : pairs) {
    const GtTriplet& g = gts[s.gt];
    if (g.sub_class < 0 || static_cast<std::size_t>(g.sub_class) >= n_ent ||
        g.obj_class < 0 || static_cast<std::size_t>(g.obj_class) >= n_ent ||
        g.rel_class < 0 || static_cast<std::size_t>(g.rel_class) >= n_rel) {
      throw IndexError("ground-truth class index out of range");
    }
    sub_t[s.query * n_ent + static_cast<std::size_t>(g.sub_class)] = 1.0;
    obj_t[s.query * n_ent + static_cast<std::size_t>(g.obj_class)] = 1.0;
    rel_t[s.query * n_rel + static_cast<std::size_t>(g.rel_class)] = 1.0;
    queries.push_back(s.query);
    for (double v : g.sub_box.as_array()) sub_gt.push_back(v);
    for (double v : g.obj_box.as_array()) obj_gt.push_back(v);
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, pairs.size()));
  const double a = w.focal_alpha, gm = w.focal_gamma;

  Tensor entity = scale(sigmoid_focal_loss(preds.sub_logits, sub_t, a, gm) +
                            sigmoid_focal_loss(preds.obj_logits, obj_t, a, gm),
                        norm);
  Tensor relation = scale(sigmoid_focal_loss(preds.rel_logits, rel_t, a, gm), norm);

  BranchLoss out;
  out.parts.branch = branch;
  out.parts.entity_cls = entity.item();
  out.parts.relation_cls = relation.item();
  Tensor total = scale(entity, w.cls) + scale(relation, w.rel);
  if (!queries.empty()) {
    const std::size_t p = queries.size();
    Tensor sub_pred = gather_rows(preds.sub_boxes, queries);
    Tensor obj_pred = gather_rows(preds.obj_boxes, queries);
    Tensor sub_tgt = Tensor::from(p, 4, std::move(sub_gt));
    Tensor obj_tgt = Tensor::from(p, 4, std::move(obj_gt));
    Tensor l1 = scale(box_l1_loss(sub_pred, sub_tgt) + box_l1_loss(obj_pred, obj_tgt), norm);
    Tensor gi = scale(box_giou_loss(sub_pred, sub_tgt) + box_giou_loss(obj_pred, obj_tgt), norm);
    out.parts.box_l1 = l1.item();
    out.parts.box_giou = gi.item();
    total = total + scale(l1, w.l1) + scale(gi, w.giou);
  }
  out.total = scale(total, branch_scale);
  out.parts.total = out.total.item();
  return out;
}

}  // namespace

BranchLoss loss_o2o(const PredictionTensors& preds,
                    std::span<const GtTriplet> gts,
                    const O2OAssignment& assignment, const LossWeights& w) {
  std::vector<Supervision> pairs;
  for (const MatchPair& p : assignment.pairs) pairs.push_back({p.gt, p.query});
  return supervised(preds, gts, pairs, w, 1.0, Branch::kO2O);
}

BranchLoss loss_o2m(const PredictionTensors& preds,
                    std::span<const GtTriplet> gts,
                    const O2MAssignment& assignment, const LossWeights& w) {
  std::vector<Supervision> pairs;
  for (const O2MPair& p : assignment.pairs) pairs.push_back({p.gt, p.query});
  return supervised(preds, gts, pairs, w, w.ratio_o2m, Branch::kO2M);
}

HydraLoss loss_hydra(const PredictionTensors& rel,
                     const PredictionTensors* hydra,
                     std::span<const GtTriplet> gts,
                     const HydraLossConfig& cfg) {
  if (cfg.mode == TrainMode::kHydraComplete && hydra == nullptr) {
    throw std::invalid_argument("loss_hydra: complete mode needs branch predictions");
  }
  const std::vector<PredTriplet> rel_trip = rel.triplets();
  const PredictionTensors& o2m_preds =
      cfg.mode == TrainMode::kHydraComplete ? *hydra : rel;
  const std::vector<PredTriplet> o2m_trip =
      cfg.mode == TrainMode::kHydraComplete ? hydra->triplets() : rel_trip;

  HybridConfig acfg = cfg.assign;
  acfg.o2m_enabled = acfg.o2m_enabled && cfg.mode != TrainMode::kBaselineO2O;

  HydraLoss out;
  out.assignment = assign_hybrid(gts, rel_trip, o2m_trip, acfg);
  BranchLoss o2o = loss_o2o(rel, gts, out.assignment.o2o, cfg.weights);
  out.o2o = o2o.parts;
  out.total = o2o.total;
  out.o2m.branch = Branch::kO2M;
  if (acfg.o2m_enabled) {
    BranchLoss o2m = loss_o2m(o2m_preds, gts, out.assignment.o2m, cfg.weights);
    out.o2m = o2m.parts;
    out.total = out.total + o2m.total;
  }
  return out;
}

}  // namespace hydra
