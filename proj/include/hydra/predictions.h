#pragma once

#include <cstddef>
#include <vector>

#include "hydra/tensor.h"
#include "hydra/triplet.h"

namespace hydra {

/// Head outputs for N queries; rows are queries.
struct PredictionTensors {
  Tensor sub_logits;  // N x |C|
  Tensor obj_logits;  // N x |C|
  Tensor rel_logits;  // N x |P|
  Tensor sub_boxes;   // N x 4, (cx, cy, w, h) in (0,1)
  Tensor obj_boxes;   // N x 4

  std::size_t size() const { return rel_logits.rows(); }

  // Decodes the current values into plain per-query triplets.
  std::vector<PredTriplet> triplets() const;
};

}  // namespace hydra
