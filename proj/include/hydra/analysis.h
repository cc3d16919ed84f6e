#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydra/decoder.h"
#include "hydra/synthdata.h"
#include "hydra/tensor.h"
#include "hydra/triplet.h"

namespace hydra {

// Thrown when a statistic is undefined for its input (e.g. zero variance).
class StatisticError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Distinct argmax relation classes over the predictions. With `top_k`, only
// the k most confident predictions count.
std::size_t diversity_score(std::span<const PredTriplet> preds,
                            std::optional<std::size_t> top_k = std::nullopt);

struct AdsReport {
  std::vector<std::size_t> ds_on;   // per image, self-attention active
  std::vector<std::size_t> ds_off;  // per image, self-attention bypassed
  double ads_on = 0.0;
  double ads_off = 0.0;
};

// Mean diversity score over the dataset through one decoder path.
double ads(const RelationModel& model, std::span<const SceneSample> dataset,
           bool sa_enabled, std::optional<std::size_t> top_k = std::nullopt);

AdsReport ads_report(const RelationModel& model,
                     std::span<const SceneSample> dataset,
                     std::optional<std::size_t> top_k = std::nullopt);

// Euclidean distances between all row pairs, ordered (0,1), (0,2), ...,
// (1,2), ... Throws std::invalid_argument for fewer than two rows.
std::vector<double> pairwise_distances(const Tensor& q);

struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;  // sample sd, n - 1 denominator
  double t = 0.0;
  double p = 0.0;  // two-sided
  double d = 0.0;  // Cohen's d on the paired differences
};

// Paired t-test on x - y. Throws std::invalid_argument on length mismatch or
// n < 2 and StatisticError when the differences have zero variance.
TTestResult paired_ttest(std::span<const double> x, std::span<const double> y);

// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

enum class DistancePooling {
  kPairs,          // one observation per (image, pair)
  kPerImageMeans,  // one observation per image
};

struct DistanceStats {
  std::size_t n_images = 0;
  std::size_t n_pairs_per_image = 0;
  std::size_t n_pairs = 0;  // total over all images
  double mean_on = 0.0;
  double mean_off = 0.0;
  // True when every paired distance is identical; the test is then undefined
  // and `test` is empty.
  bool exact_equality = false;
  std::optional<TTestResult> test;  // on on - off
};

/// Pairwise distances between final-layer relation queries ([sub, obj] per
/// query) with self-attention on and off, paired by (image, pair).
DistanceStats distance_study(const RelationModel& model,
                             std::span<const SceneSample> dataset,
                             DistancePooling pooling = DistancePooling::kPairs);

struct AnalysisReport {
  AdsReport ads;
  DistanceStats distance;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

AnalysisReport analyze(const RelationModel& model,
                       std::span<const SceneSample> dataset, std::uint64_t seed,
                       DistancePooling pooling = DistancePooling::kPairs);

}  // namespace hydra
