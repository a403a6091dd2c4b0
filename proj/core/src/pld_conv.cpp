#include "msgnet/pld_conv.hpp"

#include <cmath>

namespace msgnet {

void PLDConfig::validate() const {
  check(in_channels >= 1 && out_channels >= 1, "PLDConfig: channel counts must be positive");
  check(kernel_x >= 1 && kernel_x % 2 == 1, "PLDConfig: kernel_x must be odd and >= 1");
  check(kernel_y >= 1 && kernel_y % 2 == 1, "PLDConfig: kernel_y must be odd and >= 1");
  check(dilation_x >= 1, "PLDConfig: dilation_x must be >= 1");
  limits.validate();
}

std::vector<Point2D> PLDConfig::kernel_spec() const {
  std::vector<Point2D> ks;
  int64_t half = (kernel_x - 1) / 2;
  for (int64_t t = -half; t <= half; ++t)
    ks.push_back({static_cast<double>(t * dilation_x), 0.0});
  return ks;
}

PLDParams::PLDParams(const PLDConfig& config, std::mt19937_64& rng) {
  config.validate();
  int64_t cin = config.in_channels, cout = config.out_channels;
  int64_t k = config.kernel_points();
  Conv2dSpec same3;
  same3.pad_h = same3.pad_w = 1;
  offset_predictor = Conv2d(cin, 2 * k, 3, 3, rng, same3, /*zero_init=*/true);

  double sx = std::sqrt(2.0 / static_cast<double>(cin * config.kernel_x));
  double sy = std::sqrt(2.0 / static_cast<double>(cin * config.kernel_y));
  double sf = std::sqrt(2.0 / static_cast<double>(2 * cout));
  weights_x = Tensor::randn({cout, cin, 1, config.kernel_x}, rng, sx).set_requires_grad(true);
  bias_x = Tensor::zeros({cout}).set_requires_grad(true);
  weights_y = Tensor::randn({cout, cin, config.kernel_y, 1}, rng, sy).set_requires_grad(true);
  bias_y = Tensor::zeros({cout}).set_requires_grad(true);
  fuse_weights = Tensor::randn({cout, 2 * cout, 1, 1}, rng, sf).set_requires_grad(true);
  fuse_bias = Tensor::zeros({cout}).set_requires_grad(true);
}

void PLDParams::register_into(ParamRegistry& reg, const std::string& prefix) const {
  offset_predictor.register_into(reg, prefix + ".offset_predictor");
  reg.add_param(prefix + ".weights_x", weights_x);
  reg.add_param(prefix + ".bias_x", bias_x);
  reg.add_param(prefix + ".weights_y", weights_y);
  reg.add_param(prefix + ".bias_y", bias_y);
  reg.add_param(prefix + ".fuse_weights", fuse_weights);
  reg.add_param(prefix + ".fuse_bias", fuse_bias);
}

int64_t PLDParams::param_count() const {
  return offset_predictor.param_count() + weights_x.numel() + bias_x.numel() +
         weights_y.numel() + bias_y.numel() + fuse_weights.numel() + fuse_bias.numel();
}

OffsetField predict_offsets(const Tensor& input, const PLDParams& params,
                            const PLDConfig& config) {
  config.validate();
  const Shape& s = input.shape();
  check(s.size() == 4, "predict_offsets: input must be 4-D");
  check(s[1] == config.in_channels,
        "predict_offsets: input has " + std::to_string(s[1]) + " channels, config expects " +
            std::to_string(config.in_channels));
  int64_t k = config.kernel_points();
  Tensor raw = params.offset_predictor.forward(input);  // (N, 2K, H, W)
  Tensor raw5 = raw.reshape({s[0], k, 2, s[2], s[3]});
  return clamp_offsets(raw5, config.limits);
}

namespace {

// Rearranges weights_x (Cout, Cin, 1, Kx) into (Cout, Kx*Cin, 1, 1) so it can
// contract against kernel-point-major sampled channels as a 1x1 convolution.
// Built from slice/concat so gradients flow back to the original layout.
Tensor flatten_weights_x(const Tensor& weights_x, int64_t cout, int64_t cin, int64_t k) {
  Tensor flat = weights_x.reshape({cout * cin, k, 1, 1});
  std::vector<Tensor> taps;
  taps.reserve(k);
  for (int64_t t = 0; t < k; ++t)
    taps.push_back(slice_channels(flat, t, t + 1).reshape({cout, cin, 1, 1}));
  return concat_channels(taps).reshape({cout, k * cin, 1, 1});
}

// F_x realized as bilinear sampling at the offset grid followed by a 1x1
// contraction over (kernel point, input channel) with the 1xk_x weights.
Tensor horizontal_branch(const Tensor& input, const OffsetField& offsets,
                         const PLDParams& params, const PLDConfig& config, PLDTrace* trace) {
  const Shape& s = input.shape();
  SamplingGrid grid = build_sampling_grid(s[2], s[3], config.kernel_spec(), offsets);
  if (trace) {
    trace->offsets = offsets;
    trace->grid = grid;
  }
  Tensor sampled = bilinear_sample(input, grid);  // (N, K*Cin, H, W)
  Tensor wflat = flatten_weights_x(params.weights_x, config.out_channels, config.in_channels,
                                   config.kernel_points());
  return conv2d(sampled, wflat, params.bias_x, Conv2dSpec{});
}

}  // namespace

Tensor pld_forward(const Tensor& input, const PLDParams& params, const PLDConfig& config,
                   PLDTrace* trace) {
  config.validate();
  const Shape& s = input.shape();
  check(s.size() == 4, "pld_forward: input must be 4-D");
  check(s[1] == config.in_channels, "pld_forward: channel mismatch");
  check(s[2] >= config.kernel_y && s[3] >= config.kernel_x,
        "pld_forward: spatial size smaller than kernel extents");

  OffsetField offsets = predict_offsets(input, params, config);
  Tensor fx = horizontal_branch(input, offsets, params, config, trace);

  Conv2dSpec vspec;
  vspec.pad_h = (config.kernel_y - 1) / 2;
  Tensor fy = conv2d(input, params.weights_y, params.bias_y, vspec);

  Tensor cat = concat_channels({fx, fy});
  return conv2d(cat, params.fuse_weights, params.fuse_bias, Conv2dSpec{});
}

Tensor pld_forward_rigid_reference(const Tensor& input, const PLDParams& params,
                                   const PLDConfig& config) {
  config.validate();
  Conv2dSpec hspec;
  hspec.dilation_w = config.dilation_x;
  hspec.pad_w = config.dilation_x * (config.kernel_x - 1) / 2;
  Tensor fx = conv2d(input, params.weights_x, params.bias_x, hspec);

  Conv2dSpec vspec;
  vspec.pad_h = (config.kernel_y - 1) / 2;
  Tensor fy = conv2d(input, params.weights_y, params.bias_y, vspec);

  Tensor cat = concat_channels({fx, fy});
  return conv2d(cat, params.fuse_weights, params.fuse_bias, Conv2dSpec{});
}

}  // namespace msgnet
