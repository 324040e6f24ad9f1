#include "vrdiff/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "vrdiff/error.hpp"

namespace vrdiff {

double iou(const BoundingBox& a, const BoundingBox& b) {
  // Corner-based arithmetic keeps the result in [0, 1] and makes
  // iou(a, a) exactly 1: the intersection of a box with itself reproduces
  // the same rounded corner differences as its area.
  const double a_right = a.x + a.w, a_bottom = a.y + a.h;
  const double b_right = b.x + b.w, b_bottom = b.y + b.h;
  const double iw = std::min(a_right, b_right) - std::max(a.x, b.x);
  const double ih = std::min(a_bottom, b_bottom) - std::max(a.y, b.y);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a_right - a.x) * (a_bottom - a.y);
  const double area_b = (b_right - b.x) * (b_bottom - b.y);
  return inter / (area_a + (area_b - inter));
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  const double x = std::min(a.x, b.x);
  const double y = std::min(a.y, b.y);
  const double x2 = std::max(a.x + a.w, b.x + b.w);
  const double y2 = std::max(a.y + a.h, b.y + b.h);
  return BoundingBox{x, y, x2 - x, y2 - y};
}

double normalized_distance(const BoundingBox& a, const BoundingBox& b) {
  const BoundingBox u = union_box(a, b);
  const double dx = a.center_x() - b.center_x();
  const double dy = a.center_y() - b.center_y();
  return std::sqrt(dx * dx + dy * dy) / std::sqrt(u.w * u.w + u.h * u.h);
}

Matrix spatial_mask(const BoundingBox& region, const BoundingBox& enclosing,
                    int grid) {
  if (grid < 1) {
    throw DataError("spatial_mask: grid resolution must be >= 1");
  }
  if (enclosing.w <= 0 || enclosing.h <= 0) {
    throw DataError("spatial_mask: enclosing box has zero area");
  }
  // Clip the region to the enclosing box; an empty overlap yields all zeros.
  const double rx = std::max(region.x, enclosing.x);
  const double ry = std::max(region.y, enclosing.y);
  const double rx2 = std::min(region.x + region.w, enclosing.x + enclosing.w);
  const double ry2 = std::min(region.y + region.h, enclosing.y + enclosing.h);

  Matrix mask = Matrix::Zero(grid, grid);
  if (rx2 <= rx || ry2 <= ry) return mask;

  const double cell_w = enclosing.w / grid;
  const double cell_h = enclosing.h / grid;
  for (int r = 0; r < grid; ++r) {
    const double cy = enclosing.y + (r + 0.5) * cell_h;
    if (cy < ry || cy >= ry2) continue;
    for (int c = 0; c < grid; ++c) {
      const double cx = enclosing.x + (c + 0.5) * cell_w;
      if (cx >= rx && cx < rx2) mask(r, c) = 1.0;
    }
  }
  return mask;
}

Vector flatten_mask(const Matrix& mask) {
  Vector flat(mask.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      flat(k++) = mask(r, c);
    }
  }
  return flat;
}

}  // namespace vrdiff
