#include "hydra/predictions.h"

#include <cmath>

namespace hydra {

namespace {
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> row_sigmoid(const Tensor& t, std::size_t r) {
  std::vector<double> out(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) out[c] = sigmoid(t.at(r, c));
  return out;
}

NormBox row_box(const Tensor& t, std::size_t r) {
  return {t.at(r, 0), t.at(r, 1), t.at(r, 2), t.at(r, 3)};
}
}  // namespace

std::vector<PredTriplet> PredictionTensors::triplets() const {
  std::vector<PredTriplet> out(size());
  for (std::size_t q = 0; q < size(); ++q) {
    out[q].p_sub = row_sigmoid(sub_logits, q);
    out[q].p_obj = row_sigmoid(obj_logits, q);
    out[q].p_rel = row_sigmoid(rel_logits, q);
    out[q].sub_box = row_box(sub_boxes, q);
    out[q].obj_box = row_box(obj_boxes, q);
  }
  return out;
}

}  // namespace hydra
