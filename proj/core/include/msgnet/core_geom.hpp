#pragma once

// Sampling geometry for constrained deformable convolution: the Chebyshev
// metric, smooth offset saturation, sampling-grid construction and sub-pixel
// bilinear interpolation.
//
// Coordinate convention: x is the column, y is the row, both continuous, with
// the origin at the center of the top-left pixel.

#include "msgnet/tensor.hpp"

namespace msgnet {

struct Point2D {
  double x = 0.0;
  double y = 0.0;
};

// Displacement bounds for learned offsets. r bounds the Chebyshev distance
// between a base sampling point and its shifted position; requiring
// r >= max(r_x, r_y) makes the Chebyshev bound implied by the per-axis ones.
struct OffsetLimits {
  double r_x = 4.0;
  double r_y = 1.0;
  double r = 4.0;

  void validate() const;
};

// Per-location, per-kernel-point (dx, dy) displacements.
// values shape: (batch, kernel_points, 2, height, width), component 0 = dx.
struct OffsetField {
  Tensor values;
  OffsetLimits limits;
};

// Absolute continuous sampling coordinates, same layout as OffsetField
// (component 0 = x, component 1 = y).
struct SamplingGrid {
  Tensor coords;
};

// max(|x_p - x_q|, |y_p - y_q|). Throws std::domain_error on non-finite input.
double chebyshev_distance(const Point2D& p, const Point2D& q);

// Saturates raw offsets smoothly: d = limit * tanh(raw / limit), so |d| stays
// strictly inside the bound and the map is differentiable everywhere. A zero
// limit is accepted only when every affected raw entry is zero; otherwise a
// std::domain_error is thrown.
OffsetField clamp_offsets(const Tensor& raw, const OffsetLimits& limits);

// Sub-pixel lookup of `map` (N, C, H, W) at grid coordinates
// (N, K, 2, H', W'). Output is (N, K*C, H', W') with kernel-point-major
// channel order. Coordinates outside the map read as zero; the result is
// differentiable in both the map values and the grid coordinates.
Tensor bilinear_sample(const Tensor& map, const SamplingGrid& grid);

// coords[b,k,0,i,j] = j + kernel_spec[k].x + dx, coords[b,k,1,i,j] = i +
// kernel_spec[k].y + dy. Offsets must already be clamped.
SamplingGrid build_sampling_grid(int64_t height, int64_t width,
                                 const std::vector<Point2D>& kernel_spec,
                                 const OffsetField& offsets);

}  // namespace msgnet
