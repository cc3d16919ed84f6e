#include "hydra/geometry.h"

#include <algorithm>
#include <cmath>

namespace hydra {

double CornerBox::area() const {
  return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
}

CornerBox NormBox::corners() const {
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

NormBox NormBox::from_corners(const CornerBox& c) {
  return {0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1};
}

NormBox NormBox::from_corners(double x1, double y1, double x2, double y2) {
  return from_corners(CornerBox{x1, y1, x2, y2});
}

NormBox clamp(const NormBox& b) {
  constexpr double kMinExtent = 1e-6;
  return {std::clamp(b.cx, 0.0, 1.0), std::clamp(b.cy, 0.0, 1.0),
          std::clamp(b.w, kMinExtent, 1.0), std::clamp(b.h, kMinExtent, 1.0)};
}

namespace {

struct Overlap {
  double inter = 0, uni = 0, enclosing = 0;
};

Overlap overlap(const NormBox& a, const NormBox& b) {
  const CornerBox ca = a.corners();
  const CornerBox cb = b.corners();
  const double iw = std::max(0.0, std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1));
  const double ih = std::max(0.0, std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1));
  Overlap o;
  o.inter = iw * ih;
  o.uni = ca.area() + cb.area() - o.inter;
  const CornerBox e{std::min(ca.x1, cb.x1), std::min(ca.y1, cb.y1),
                    std::max(ca.x2, cb.x2), std::max(ca.y2, cb.y2)};
  o.enclosing = e.area();
  return o;
}

}  // namespace

double iou(const NormBox& a, const NormBox& b) {
  if (a.area() <= 0.0 || b.area() <= 0.0) return 0.0;
  const Overlap o = overlap(a, b);
  return o.uni > 0.0 ? o.inter / o.uni : 0.0;
}

double giou(const NormBox& a, const NormBox& b) {
  if (a.area() <= 0.0 || b.area() <= 0.0) return 0.0;
  const Overlap o = overlap(a, b);
  if (o.uni <= 0.0 || o.enclosing <= 0.0) return 0.0;
  return o.inter / o.uni - (o.enclosing - o.uni) / o.enclosing;
}

NormBox union_box(const NormBox& a, const NormBox& b) {
  const CornerBox ca = a.corners();
  const CornerBox cb = b.corners();
  // A containing input is returned as is, so union_box(b, b) == b exactly.
  auto contains = [](const CornerBox& o, const CornerBox& i) {
    return o.x1 <= i.x1 && o.y1 <= i.y1 && o.x2 >= i.x2 && o.y2 >= i.y2;
  };
  if (contains(ca, cb)) return a;
  if (contains(cb, ca)) return b;
  return NormBox::from_corners(std::min(ca.x1, cb.x1), std::min(ca.y1, cb.y1),
                               std::max(ca.x2, cb.x2), std::max(ca.y2, cb.y2));
}

double l1_distance(const NormBox& a, const NormBox& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

}  // namespace hydra
