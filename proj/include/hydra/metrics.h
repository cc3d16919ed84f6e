#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hydra/geometry.h"
#include "hydra/triplet.h"

namespace hydra {

/// A query reduced to argmax classes, ranked by relation probability.
struct RankedPrediction {
  int sub_class = 0;
  int obj_class = 0;
  int rel_class = 0;
  double score = 0.0;  // probability of rel_class
  NormBox sub_box;
  NormBox obj_box;
  std::size_t query = 0;  // row in the source prediction set
};

enum class Protocol {
  kVisualGenome,  // drops predictions whose subject and object coincide
  kOpenImages,    // keeps them; adds wmAP and the weighted score
};

struct RankOptions {
  bool drop_same_entity = true;
  // Subject and object count as the same entity when their classes agree and
  // their boxes overlap at least this much.
  double same_entity_iou = 0.7;
  // Keep only the best-ranked prediction per (subject, object) pair.
  bool graph_constraint = false;
};

RankOptions rank_options_for(Protocol protocol);

// Sorted by descending score; equal scores keep query order.
std::vector<RankedPrediction> rank_predictions(
    std::span<const PredTriplet> preds, const RankOptions& opts = {});

enum class MatchMode {
  kRelation,  // both boxes at IoU >= 0.5
  kPhrase,    // union boxes at IoU >= 0.5
};

inline constexpr double kMatchIou = 0.5;

// Greedy top-down matching; every ground truth is consumed at most once.
// Returns one hit flag per prediction.
std::vector<bool> match_triplets(std::span<const RankedPrediction> preds,
                                 std::span<const GtTriplet> gts,
                                 MatchMode mode = MatchMode::kRelation);

/// One image's ranked predictions with its ground truth.
struct EvalImage {
  std::vector<RankedPrediction> preds;
  std::vector<GtTriplet> gts;
};

// Hits in the top k over |gts|; nullopt when the image has no ground truth.
std::optional<double> image_recall_at_k(const EvalImage& image, std::size_t k);

// Mean of per-image recalls, skipping images without ground truth.
double recall_at_k(std::span<const EvalImage> images, std::size_t k);

struct MeanRecall {
  double value = 0.0;
  // Pooled recall per predicate; nullopt for predicates with no ground truth.
  std::vector<std::optional<double>> per_predicate;
};

MeanRecall mean_recall_at_k(std::span<const EvalImage> images, std::size_t k,
                            std::size_t n_predicates);

// Harmonic mean of recall and mean recall; 0 when both are 0.
double f_recall(double r, double mr);

// All-point interpolated AP from hit flags sorted by confidence.
double average_precision(const std::vector<bool>& hits, std::size_t n_gt);

// GT-count weighted mean of per-predicate AP, pooled across images.
double wmap(std::span<const EvalImage> images, MatchMode mode,
            std::size_t n_predicates);

// 0.2 * R@50 + 0.4 * wmAP_rel + 0.4 * wmAP_phr, on any common scale.
double score_wtd(double r50, double wmap_rel, double wmap_phr);

inline constexpr std::array<std::size_t, 3> kRecallKs = {20, 50, 100};

struct MetricsReport {
  Protocol protocol = Protocol::kVisualGenome;
  std::size_t n_images = 0;
  std::array<double, 3> recall{};
  std::array<double, 3> mean_recall{};
  std::array<double, 3> f_recall{};
  std::array<std::vector<std::optional<double>>, 3> per_predicate;
  std::optional<double> wmap_rel;
  std::optional<double> wmap_phr;
  std::optional<double> score_wtd;

  // Values are fractions in [0, 1].
  std::string to_json(std::span<const std::string> predicate_names = {}) const;
  // predicate,R@20,R@50,R@100; empty cells for predicates without ground truth.
  std::string per_predicate_csv(
      std::span<const std::string> predicate_names = {}) const;
};

MetricsReport evaluate(std::span<const EvalImage> images, Protocol protocol,
                       std::size_t n_predicates);

}  // namespace hydra
