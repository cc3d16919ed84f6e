#pragma once

#include <array>

namespace hydra {

struct CornerBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double area() const;
};

/// Center-format box in image-normalized coordinates.
struct NormBox {
  double cx = 0, cy = 0, w = 0, h = 0;

  CornerBox corners() const;
  static NormBox from_corners(const CornerBox& c);
  static NormBox from_corners(double x1, double y1, double x2, double y2);

  double area() const { return w * h; }
  std::array<double, 4> as_array() const { return {cx, cy, w, h}; }
  bool operator==(const NormBox&) const = default;
};

// Clamps the center into [0,1] and the extent into (0,1].
NormBox clamp(const NormBox& b);

// Intersection over union; 0 for disjoint or zero-area boxes.
double iou(const NormBox& a, const NormBox& b);

// Generalized IoU: iou - (enclosing - union) / enclosing, in [-1, 1].
double giou(const NormBox& a, const NormBox& b);

// Smallest axis-aligned box covering both inputs.
NormBox union_box(const NormBox& a, const NormBox& b);

// Sum of absolute differences over (cx, cy, w, h).
double l1_distance(const NormBox& a, const NormBox& b);

}  // namespace hydra
