#pragma once

#include <cstddef>
#include <vector>

#include "hydra/geometry.h"

namespace hydra {

/// Ground-truth <subject, relation, object> with entity classes and boxes.
struct GtTriplet {
  int sub_class = 0;
  int obj_class = 0;
  int rel_class = 0;
  NormBox sub_box;
  NormBox obj_box;
  // Indices of the subject/object entities in the owning scene.
  int sub_entity = -1;
  int obj_entity = -1;

  bool operator==(const GtTriplet&) const = default;
};

/// One query's decoded prediction: per-class sigmoid probabilities and boxes.
struct PredTriplet {
  std::vector<double> p_sub;
  std::vector<double> p_obj;
  std::vector<double> p_rel;
  NormBox sub_box;
  NormBox obj_box;
};

}  // namespace hydra
