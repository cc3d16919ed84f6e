#include "hydra/matching.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hydra/tensor.h"

namespace hydra {

CostMatrix CostMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  CostMatrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw DimensionError("ragged cost matrix at row " + std::to_string(r));
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path with potentials, O(n^2 m). `allowed_rows` and
// `allowed_cols` select the sub-problem; returns the chosen column per row
// (indices into allowed_cols) and the optimal cost.
double solve(const CostMatrix& c, const std::vector<std::size_t>& rows,
             const std::vector<std::size_t>& cols,
             std::vector<std::size_t>* choice) {
  const std::size_t n = rows.size(), m = cols.size();
  choice->assign(n, 0);
  if (n == 0) return 0.0;
  // 1-based arrays; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) (*choice)[p[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) total += c(rows[i], cols[(*choice)[i]]);
  return total;
}

bool same_cost(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
}

}  // namespace

O2OAssignment hungarian(const CostMatrix& cost) {
  const std::size_t m = cost.rows(), n = cost.cols();
  if (m > n) {
    throw DimensionError("hungarian needs rows <= cols, got " +
                         Shape{m, n}.str());
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (!std::isfinite(cost(r, c))) {
        throw ValueError("non-finite cost at (" + std::to_string(r) + "," +
                         std::to_string(c) + ")");
      }
    }
  }
  O2OAssignment out;
  if (m == 0) return out;

  std::vector<std::size_t> rows(m), cols(n), choice;
  for (std::size_t i = 0; i < m; ++i) rows[i] = i;
  for (std::size_t j = 0; j < n; ++j) cols[j] = j;
  const double best = solve(cost, rows, cols, &choice);

  // Fix rows one at a time to the smallest query that keeps the optimum.
  std::vector<char> taken(n, 0);
  double prefix = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::size_t> rest_rows(rows.begin() + i + 1, rows.end());
    bool fixed = false;
    for (std::size_t q = 0; q < n && !fixed; ++q) {
      if (taken[q]) continue;
      std::vector<std::size_t> rest_cols;
      for (std::size_t j = 0; j < n; ++j) {
        if (!taken[j] && j != q) rest_cols.push_back(j);
      }
      const double rest = solve(cost, rest_rows, rest_cols, &choice);
      if (same_cost(prefix + cost(i, q) + rest, best)) {
        out.pairs.push_back({i, q});
        taken[q] = 1;
        prefix += cost(i, q);
        fixed = true;
      }
    }
    if (!fixed) {
      throw std::logic_error("hungarian: lexicographic refinement failed");
    }
  }
  for (const MatchPair& pr : out.pairs) out.total_cost += cost(pr.gt, pr.query);
  return out;
}

double triplet_cost(const GtTriplet& gt, const PredTriplet& pred,
                    const CostWeights& w) {
  auto prob = [](const std::vector<double>& p, int c, const char* role) {
    if (c < 0 || static_cast<std::size_t>(c) >= p.size()) {
      throw IndexError(std::string(role) + " class index " + std::to_string(c) +
                       " out of range [0," + std::to_string(p.size()) + ")");
    }
    return p[static_cast<std::size_t>(c)];
  };
  const double cls = (1.0 - prob(pred.p_sub, gt.sub_class, "subject")) +
                     (1.0 - prob(pred.p_obj, gt.obj_class, "object"));
  const double rel = 1.0 - prob(pred.p_rel, gt.rel_class, "relation");
  const double l1 = l1_distance(pred.sub_box, gt.sub_box) +
                    l1_distance(pred.obj_box, gt.obj_box);
  const double gi = (1.0 - giou(pred.sub_box, gt.sub_box)) +
                    (1.0 - giou(pred.obj_box, gt.obj_box));
  return w.cls * cls + w.rel * rel + w.l1 * l1 + w.giou * gi;
}

O2OAssignment assign_o2o(std::span<const GtTriplet> gts,
                         std::span<const PredTriplet> preds,
                         const CostWeights& w) {
  CostMatrix cost(gts.size(), preds.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t q = 0; q < preds.size(); ++q) {
      cost(g, q) = triplet_cost(gts[g], preds[q], w);
    }
  }
  return hungarian(cost);
}

}  // namespace hydra
