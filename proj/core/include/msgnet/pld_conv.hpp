#pragma once

// Parameter-limited dilated convolution: a horizontally dilated convolution
// sampled at learned, Chebyshev-bounded offsets, a rigid vertical
// convolution, and a learned 1x1 fusion of the two directional branches.

#include "msgnet/core_geom.hpp"
#include "msgnet/nn.hpp"
#include "msgnet/tensor.hpp"

namespace msgnet {

struct PLDConfig {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kernel_x = 3;   // width of the horizontal kernel (odd)
  int64_t kernel_y = 3;   // height of the vertical kernel (odd)
  int64_t dilation_x = 2; // horizontal dilation rate
  OffsetLimits limits;    // defaults r_x=4, r_y=1, r=4

  void validate() const;
  int64_t kernel_points() const { return kernel_x; }
  // Base displacements of the dilated horizontal taps relative to the center.
  std::vector<Point2D> kernel_spec() const;
};

struct PLDParams {
  Conv2d offset_predictor;  // in -> 2*K raw offsets, 3x3 same padding
  Tensor weights_x;         // (out, in, 1, kernel_x)
  Tensor bias_x;            // (out)
  Tensor weights_y;         // (out, in, kernel_y, 1)
  Tensor bias_y;            // (out)
  Tensor fuse_weights;      // (out, 2*out, 1, 1)
  Tensor fuse_bias;         // (out)

  PLDParams() = default;
  // Offset predictor is zero-initialized so an untrained block starts rigid.
  PLDParams(const PLDConfig& config, std::mt19937_64& rng);

  void register_into(ParamRegistry& reg, const std::string& prefix) const;
  int64_t param_count() const;
};

// Optional capture of the quantities realized inside a forward pass, for
// constraint auditing.
struct PLDTrace {
  OffsetField offsets;
  SamplingGrid grid;
};

// 3x3 convolution over the input emits 2*K raw channels, reshaped to
// (batch, K, 2, H, W) and smoothly saturated to the configured limits.
OffsetField predict_offsets(const Tensor& input, const PLDParams& params,
                            const PLDConfig& config);

// F_x: dilated 1xk_x convolution at offset sampling positions; F_y: rigid
// k_yx1 convolution; output: 1x1 fusion of the channel concatenation.
// Spatial size is preserved.
Tensor pld_forward(const Tensor& input, const PLDParams& params, const PLDConfig& config,
                   PLDTrace* trace = nullptr);

// Rigid reference: the same three convolutions with zero offsets, built from
// plain conv2d calls only. Used as the degeneracy oracle.
Tensor pld_forward_rigid_reference(const Tensor& input, const PLDParams& params,
                                   const PLDConfig& config);

}  // namespace msgnet
