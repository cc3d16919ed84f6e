#include "hydra/o2m.h"

#include <algorithm>
#include <string>

#include "hydra/tensor.h"

namespace hydra {

double score_o2m(const GtTriplet& gt, const PredTriplet& pred) {
  auto prob = [](const std::vector<double>& p, int c, const char* role) {
    if (c < 0 || static_cast<std::size_t>(c) >= p.size()) {
      throw IndexError(std::string(role) + " class index " + std::to_string(c) +
                       " out of range [0," + std::to_string(p.size()) + ")");
    }
    return p[static_cast<std::size_t>(c)];
  };
  return prob(pred.p_sub, gt.sub_class, "subject") +
         prob(pred.p_obj, gt.obj_class, "object") +
         iou(gt.sub_box, pred.sub_box) + iou(gt.obj_box, pred.obj_box);
}

O2MScoreMatrix score_matrix(std::span<const GtTriplet> gts,
                            std::span<const PredTriplet> preds) {
  O2MScoreMatrix s(gts.size(), preds.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t q = 0; q < preds.size(); ++q) {
      s(g, q) = score_o2m(gts[g], preds[q]);
    }
  }
  return s;
}

O2MAssignment select_o2m(const O2MScoreMatrix& scores, const O2MConfig& cfg) {
  const std::size_t m = scores.rows(), n = scores.cols();
  const double divisor = cfg.mode == ThresholdMode::kNormalized ? 4.0 : 1.0;

  std::vector<std::vector<std::size_t>> picked(m);
  for (std::size_t g = 0; g < m; ++g) {
    std::vector<std::size_t> cand;
    for (std::size_t q = 0; q < n; ++q) {
      if (scores(g, q) / divisor > cfg.threshold) cand.push_back(q);
    }
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      return scores(g, a) > scores(g, b);
    });
    if (cand.size() > cfg.k) cand.resize(cfg.k);
    picked[g] = std::move(cand);
  }

  // owner[q] = gt that keeps query q.
  std::vector<std::size_t> owner(n, m);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t q : picked[g]) {
      if (owner[q] == m || scores(g, q) > scores(owner[q], q)) owner[q] = g;
    }
  }

  O2MAssignment out;
  out.per_gt_counts.assign(m, 0);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t q : picked[g]) {
      if (owner[q] != g) continue;
      out.pairs.push_back({g, q, scores(g, q)});
      ++out.per_gt_counts[g];
    }
  }
  return out;
}

O2MAssignment assign_o2m(std::span<const GtTriplet> gts,
                         std::span<const PredTriplet> preds,
                         const O2MConfig& cfg) {
  return select_o2m(score_matrix(gts, preds), cfg);
}

HybridAssignment assign_hybrid(std::span<const GtTriplet> gts,
                               std::span<const PredTriplet> preds_o2o,
                               std::span<const PredTriplet> preds_o2m,
                               const HybridConfig& cfg) {
  if (preds_o2o.size() != preds_o2m.size()) {
    throw DimensionError("assign_hybrid: branches disagree on query count (" +
                         std::to_string(preds_o2o.size()) + " vs " +
                         std::to_string(preds_o2m.size()) + ")");
  }
  HybridAssignment out;
  out.o2o = assign_o2o(gts, preds_o2o, cfg.cost);
  if (cfg.o2m_enabled) {
    out.o2m = assign_o2m(gts, preds_o2m, cfg.o2m);
  } else {
    out.o2m.per_gt_counts.assign(gts.size(), 0);
  }
  out.positives_total = out.o2o.pairs.size() + out.o2m.pairs.size();
  return out;
}

PositiveStats count_positives(std::span<const HybridAssignment> assignments) {
  PositiveStats s;
  for (const HybridAssignment& a : assignments) {
    s.per_image.push_back({a.o2o.pairs.size(), a.o2m.pairs.size(),
                           a.positives_total});
    s.mean_o2o += static_cast<double>(a.o2o.pairs.size());
    s.mean_o2m += static_cast<double>(a.o2m.pairs.size());
    s.mean_hybrid += static_cast<double>(a.positives_total);
  }
  if (!assignments.empty()) {
    const double n = static_cast<double>(assignments.size());
    s.mean_o2o /= n;
    s.mean_o2m /= n;
    s.mean_hybrid /= n;
  }
  if (s.mean_o2o > 0.0) s.increase_pct = 100.0 * (s.mean_hybrid / s.mean_o2o - 1.0);
  return s;
}

}  // namespace hydra
