#include "hydra/metrics.h"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace hydra {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
}

bool is_hit(const RankedPrediction& p, const GtTriplet& g, MatchMode mode) {
  if (p.sub_class != g.sub_class || p.obj_class != g.obj_class ||
      p.rel_class != g.rel_class) {
    return false;
  }
  if (mode == MatchMode::kRelation) {
    return iou(p.sub_box, g.sub_box) >= kMatchIou &&
           iou(p.obj_box, g.obj_box) >= kMatchIou;
  }
  return iou(union_box(p.sub_box, p.obj_box), union_box(g.sub_box, g.obj_box)) >=
         kMatchIou;
}

bool same_pair(const RankedPrediction& a, const RankedPrediction& b,
               double min_iou) {
  return a.sub_class == b.sub_class && a.obj_class == b.obj_class &&
         iou(a.sub_box, b.sub_box) >= min_iou &&
         iou(a.obj_box, b.obj_box) >= min_iou;
}

std::string predicate_label(std::span<const std::string> names, std::size_t i) {
  return i < names.size() ? names[i] : std::to_string(i);
}

}  // namespace

RankOptions rank_options_for(Protocol protocol) {
  RankOptions o;
  o.drop_same_entity = protocol == Protocol::kVisualGenome;
  return o;
}

std::vector<RankedPrediction> rank_predictions(
    std::span<const PredTriplet> preds, const RankOptions& opts) {
  std::vector<RankedPrediction> out;
  out.reserve(preds.size());
  for (std::size_t q = 0; q < preds.size(); ++q) {
    const PredTriplet& p = preds[q];
    RankedPrediction r;
    r.sub_class = static_cast<int>(argmax(p.p_sub));
    r.obj_class = static_cast<int>(argmax(p.p_obj));
    const std::size_t rel = argmax(p.p_rel);
    r.rel_class = static_cast<int>(rel);
    r.score = p.p_rel[rel];
    r.sub_box = p.sub_box;
    r.obj_box = p.obj_box;
    r.query = q;
    if (opts.drop_same_entity && r.sub_class == r.obj_class &&
        iou(r.sub_box, r.obj_box) >= opts.same_entity_iou) {
      continue;
    }
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedPrediction& a, const RankedPrediction& b) {
                     return a.score > b.score;
                   });
  if (opts.graph_constraint) {
    std::vector<RankedPrediction> kept;
    for (const RankedPrediction& r : out) {
      const bool dup = std::any_of(kept.begin(), kept.end(), [&](const auto& k) {
        return same_pair(k, r, opts.same_entity_iou);
      });
      if (!dup) kept.push_back(r);
    }
    out = std::move(kept);
  }
  return out;
}

std::vector<bool> match_triplets(std::span<const RankedPrediction> preds,
                                 std::span<const GtTriplet> gts,
                                 MatchMode mode) {
  std::vector<bool> hits(preds.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!used[g] && is_hit(preds[i], gts[g], mode)) {
        used[g] = true;
        hits[i] = true;
        break;
      }
    }
  }
  return hits;
}

std::optional<double> image_recall_at_k(const EvalImage& image, std::size_t k) {
  if (image.gts.empty()) return std::nullopt;
  const std::size_t top = std::min(k, image.preds.size());
  const auto hits = match_triplets(
      std::span<const RankedPrediction>(image.preds).first(top), image.gts);
  const auto n = std::count(hits.begin(), hits.end(), true);
  return static_cast<double>(n) / static_cast<double>(image.gts.size());
}

double recall_at_k(std::span<const EvalImage> images, std::size_t k) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const EvalImage& img : images) {
    if (auto r = image_recall_at_k(img, k)) {
      sum += *r;
      ++counted;
    }
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

MeanRecall mean_recall_at_k(std::span<const EvalImage> images, std::size_t k,
                            std::size_t n_predicates) {
  std::vector<std::size_t> gt_count(n_predicates, 0), hit_count(n_predicates, 0);
  for (const EvalImage& img : images) {
    const std::size_t top = std::min(k, img.preds.size());
    const auto preds = std::span<const RankedPrediction>(img.preds).first(top);
    const auto hits = match_triplets(preds, img.gts);
    for (const GtTriplet& g : img.gts) {
      if (g.rel_class >= 0 && static_cast<std::size_t>(g.rel_class) < n_predicates) {
        ++gt_count[static_cast<std::size_t>(g.rel_class)];
      }
    }
    for (std::size_t i = 0; i < preds.size(); ++i) {
      // A hit shares its ground truth's predicate.
      if (hits[i]) ++hit_count[static_cast<std::size_t>(preds[i].rel_class)];
    }
  }
  MeanRecall out;
  out.per_predicate.resize(n_predicates);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_predicates; ++c) {
    if (gt_count[c] == 0) continue;
    const double r =
        static_cast<double>(hit_count[c]) / static_cast<double>(gt_count[c]);
    out.per_predicate[c] = r;
    sum += r;
    ++present;
  }
  out.value = present == 0 ? 0.0 : sum / static_cast<double>(present);
  return out;
}

double f_recall(double r, double mr) {
  if (r + mr == 0.0) return 0.0;
  return 2.0 * r * mr / (r + mr);
}

double average_precision(const std::vector<bool>& hits, std::size_t n_gt) {
  if (n_gt == 0 || hits.empty()) return 0.0;
  std::vector<double> recall, precision;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  // Precision envelope, then area under the step curve.
  for (std::size_t i = precision.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double wmap(std::span<const EvalImage> images, MatchMode mode,
            std::size_t n_predicates) {
  struct Scored {
    double score;
    bool hit;
  };
  std::vector<std::vector<Scored>> per_class(n_predicates);
  std::vector<std::size_t> gt_count(n_predicates, 0);
  for (const EvalImage& img : images) {
    const auto hits = match_triplets(img.preds, img.gts, mode);
    for (std::size_t i = 0; i < img.preds.size(); ++i) {
      const auto c = static_cast<std::size_t>(img.preds[i].rel_class);
      if (c < n_predicates) per_class[c].push_back({img.preds[i].score, hits[i]});
    }
    for (const GtTriplet& g : img.gts) {
      if (g.rel_class >= 0 && static_cast<std::size_t>(g.rel_class) < n_predicates) {
        ++gt_count[static_cast<std::size_t>(g.rel_class)];
      }
    }
  }
  const std::size_t total = std::accumulate(gt_count.begin(), gt_count.end(),
                                            std::size_t{0});
  if (total == 0) return 0.0;
  double out = 0.0;
  for (std::size_t c = 0; c < n_predicates; ++c) {
    if (gt_count[c] == 0) continue;
    auto& scored = per_class[c];
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    std::vector<bool> flags;
    flags.reserve(scored.size());
    for (const Scored& s : scored) flags.push_back(s.hit);
    const double ap = average_precision(flags, gt_count[c]);
    out += ap * static_cast<double>(gt_count[c]) / static_cast<double>(total);
  }
  return out;
}

double score_wtd(double r50, double wmap_rel, double wmap_phr) {
  return 0.2 * r50 + 0.4 * wmap_rel + 0.4 * wmap_phr;
}

MetricsReport evaluate(std::span<const EvalImage> images, Protocol protocol,
                       std::size_t n_predicates) {
  MetricsReport rep;
  rep.protocol = protocol;
  rep.n_images = images.size();
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    rep.recall[i] = recall_at_k(images, kRecallKs[i]);
    MeanRecall mr = mean_recall_at_k(images, kRecallKs[i], n_predicates);
    rep.mean_recall[i] = mr.value;
    rep.per_predicate[i] = std::move(mr.per_predicate);
    rep.f_recall[i] = f_recall(rep.recall[i], rep.mean_recall[i]);
  }
  if (protocol == Protocol::kOpenImages) {
    rep.wmap_rel = wmap(images, MatchMode::kRelation, n_predicates);
    rep.wmap_phr = wmap(images, MatchMode::kPhrase, n_predicates);
    rep.score_wtd = score_wtd(rep.recall[1], *rep.wmap_rel, *rep.wmap_phr);
  }
  return rep;
}

std::string MetricsReport::to_json(
    std::span<const std::string> predicate_names) const {
  nlohmann::ordered_json j;
  j["protocol"] = protocol == Protocol::kVisualGenome ? "vg" : "oi";
  j["n_images"] = n_images;
  j["recall_averaging"] = "per-image";
  for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
    const std::string k = std::to_string(kRecallKs[i]);
    j["recall@" + k] = recall[i];
    j["mean_recall@" + k] = mean_recall[i];
    j["f_recall@" + k] = f_recall[i];
  }
  if (wmap_rel) {
    j["wmap_pooling"] = "dataset";
    j["wmap_rel"] = *wmap_rel;
    j["wmap_phr"] = *wmap_phr;
    j["score_wtd"] = *score_wtd;
  }
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  const std::size_t n = per_predicate[0].size();
  for (std::size_t c = 0; c < n; ++c) {
    nlohmann::ordered_json row;
    row["predicate"] = predicate_label(predicate_names, c);
    for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
      const auto& v = per_predicate[i][c];
      row["recall@" + std::to_string(kRecallKs[i])] =
          v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    }
    table.push_back(std::move(row));
  }
  j["per_predicate"] = std::move(table);
  return j.dump(2);
}

std::string MetricsReport::per_predicate_csv(
    std::span<const std::string> predicate_names) const {
  std::ostringstream os;
  os << std::setprecision(17) << "predicate";
  for (std::size_t k : kRecallKs) os << ",R@" << k;
  os << '\n';
  for (std::size_t c = 0; c < per_predicate[0].size(); ++c) {
    os << predicate_label(predicate_names, c);
    for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
      os << ',';
      if (per_predicate[i][c]) os << *per_predicate[i][c];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace hydra
