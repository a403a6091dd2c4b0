#pragma once

// Multi-scale dilated residual fusion: channel compression, parallel
// progressive dilated branches with per-branch 1x1 integration, concat +
// batch norm, and a projected residual skip.

#include "msgnet/nn.hpp"
#include "msgnet/tensor.hpp"

namespace msgnet {

struct MSDRFConfig {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  std::vector<int64_t> dilation_rates = {1, 3, 5};
  int64_t compressed_channels = 0;  // 0 -> in_channels / 2

  void validate() const;
  int64_t compressed() const;
  // Rate-1 branch gets twice the width of every other branch; widths sum to
  // out_channels. Throws when the budget does not divide evenly.
  std::vector<int64_t> branch_widths() const;
};

struct MSDRFParams {
  Conv2d compress;                   // 3x3, in -> compressed
  std::vector<Conv2d> branches;      // 3x3 dilated, compressed -> width_i
  std::vector<Conv2d> branch_fuse;   // 1x1, width_i -> width_i
  BatchNorm2d bn;                    // over out_channels after concat
  Conv2d skip;                       // 1x1, in -> out, identity-init if square

  MSDRFParams() = default;
  MSDRFParams(const MSDRFConfig& config, std::mt19937_64& rng);

  void register_into(ParamRegistry& reg, const std::string& prefix) const;
  int64_t param_count() const;
};

// d*(k-1)+1, the spatial extent of a dilated kernel.
int64_t receptive_field_of_branch(int64_t kernel, int64_t dilation);

// Eq. 7-10 pipeline followed by a ReLU. Spatial size preserved; output
// channels = config.out_channels.
Tensor msdrf_forward(const Tensor& input, MSDRFParams& params, const MSDRFConfig& config,
                     bool training);

}  // namespace msgnet
