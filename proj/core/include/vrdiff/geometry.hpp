#pragma once

#include "vrdiff/corpus.hpp"
#include "vrdiff/types.hpp"

namespace vrdiff {

// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Smallest axis-aligned box covering both inputs.
BoundingBox union_box(const BoundingBox& a, const BoundingBox& b);

// Distance between box centers divided by the diagonal of their union box.
// Always in [0, 1] since both centers lie inside the union.
double normalized_distance(const BoundingBox& a, const BoundingBox& b);

// Rasterizes `region` onto a grid x grid binary mask over `enclosing`:
// a cell is 1 iff its center falls inside the (clipped) region. Throws
// DataError on a zero-area enclosing box.
Matrix spatial_mask(const BoundingBox& region, const BoundingBox& enclosing,
                    int grid);

// Row-major flattening of a mask, usable as a feature block.
Vector flatten_mask(const Matrix& mask);

}  // namespace vrdiff
