#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hydra/triplet.h"

namespace hydra {

// Thrown for non-finite cost entries.
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown for a class index outside a prediction's probability vector.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Dense rows x cols cost matrix; rows are ground truths, cols are queries.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct MatchPair {
  std::size_t gt = 0;
  std::size_t query = 0;
  bool operator==(const MatchPair&) const = default;
};

struct O2OAssignment {
  std::vector<MatchPair> pairs;  // sorted by gt, one per ground truth
  double total_cost = 0.0;
};

/// Exact minimum-cost injection of rows into columns (rows <= cols).
///
/// Among all optimal assignments the one whose query list (in gt order) is
/// lexicographically smallest is returned. Throws DimensionError when
/// rows > cols and ValueError on a non-finite entry.
O2OAssignment hungarian(const CostMatrix& cost);

struct CostWeights {
  double cls = 2.0;
  double rel = 2.0;
  double l1 = 5.0;
  double giou = 2.0;
};

// Matching cost of one prediction against one ground truth (lower is better).
double triplet_cost(const GtTriplet& gt, const PredTriplet& pred,
                    const CostWeights& w = {});

// Builds the triplet cost matrix and solves it. Queries absent from the
// result are background.
O2OAssignment assign_o2o(std::span<const GtTriplet> gts,
                         std::span<const PredTriplet> preds,
                         const CostWeights& w = {});

}  // namespace hydra
