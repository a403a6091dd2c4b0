#include "msgnet/msdrf.hpp"

namespace msgnet {

void MSDRFConfig::validate() const {
  check(in_channels >= 1 && out_channels >= 1, "MSDRFConfig: channel counts must be positive");
  check(!dilation_rates.empty(), "MSDRFConfig: need at least one dilation rate");
  for (size_t i = 0; i < dilation_rates.size(); ++i) {
    check(dilation_rates[i] >= 1, "MSDRFConfig: dilation rates must be >= 1");
    if (i) check(dilation_rates[i] > dilation_rates[i - 1],
                 "MSDRFConfig: dilation rates must be strictly increasing");
  }
  branch_widths();  // throws on a bad channel budget
}

int64_t MSDRFConfig::compressed() const {
  if (compressed_channels > 0) return compressed_channels;
  return std::max<int64_t>(1, in_channels / 2);
}

std::vector<int64_t> MSDRFConfig::branch_widths() const {
  // unit widths: rate-1 counts double
  int64_t units = 0;
  for (int64_t r : dilation_rates) units += (r == 1) ? 2 : 1;
  check(out_channels % units == 0,
        "MSDRFConfig: out_channels " + std::to_string(out_channels) +
            " must be divisible by the branch unit count " + std::to_string(units));
  int64_t w = out_channels / units;
  std::vector<int64_t> widths;
  for (int64_t r : dilation_rates) widths.push_back((r == 1) ? 2 * w : w);
  return widths;
}

MSDRFParams::MSDRFParams(const MSDRFConfig& config, std::mt19937_64& rng) {
  config.validate();
  int64_t c0 = config.compressed();
  compress = Conv2d::same(config.in_channels, c0, 3, rng);
  auto widths = config.branch_widths();
  for (size_t i = 0; i < config.dilation_rates.size(); ++i) {
    int64_t d = config.dilation_rates[i];
    Conv2dSpec sp;
    sp.dilation_h = sp.dilation_w = d;
    sp.pad_h = sp.pad_w = d;  // same padding for a 3x3 kernel
    branches.emplace_back(c0, widths[i], 3, 3, rng, sp);
    branch_fuse.emplace_back(widths[i], widths[i], 1, 1, rng, Conv2dSpec{});
  }
  bn = BatchNorm2d(config.out_channels);
  skip = Conv2d(config.in_channels, config.out_channels, 1, 1, rng, Conv2dSpec{});
  if (config.in_channels == config.out_channels) {
    // identity init keeps the residual path exact when the fused path is zero
    auto w = skip.weight.data();
    std::fill(w.begin(), w.end(), 0.0);
    for (int64_t c = 0; c < config.out_channels; ++c)
      w[c * config.in_channels + c] = 1.0;
  }
}

void MSDRFParams::register_into(ParamRegistry& reg, const std::string& prefix) const {
  compress.register_into(reg, prefix + ".compress");
  for (size_t i = 0; i < branches.size(); ++i) {
    branches[i].register_into(reg, prefix + ".branch" + std::to_string(i));
    branch_fuse[i].register_into(reg, prefix + ".branch_fuse" + std::to_string(i));
  }
  bn.register_into(reg, prefix + ".bn");
  skip.register_into(reg, prefix + ".skip");
}

int64_t MSDRFParams::param_count() const {
  int64_t n = compress.param_count() + bn.param_count() + skip.param_count();
  for (const auto& b : branches) n += b.param_count();
  for (const auto& b : branch_fuse) n += b.param_count();
  return n;
}

int64_t receptive_field_of_branch(int64_t kernel, int64_t dilation) {
  check(kernel >= 1 && kernel % 2 == 1, "receptive_field_of_branch: kernel must be odd >= 1");
  check(dilation >= 1, "receptive_field_of_branch: dilation must be >= 1");
  return dilation * (kernel - 1) + 1;
}

Tensor msdrf_forward(const Tensor& input, MSDRFParams& params, const MSDRFConfig& config,
                     bool training) {
  config.validate();
  const Shape& s = input.shape();
  check(s.size() == 4, "msdrf_forward: input must be 4-D");
  check(s[1] == config.in_channels, "msdrf_forward: channel mismatch");
  int64_t max_extent = receptive_field_of_branch(3, config.dilation_rates.back());
  check(s[2] >= max_extent && s[3] >= max_extent,
        "msdrf_forward: spatial size " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
            " smaller than the largest branch extent " + std::to_string(max_extent));

  Tensor f0 = params.compress.forward(input);
  std::vector<Tensor> fused_branches;
  for (size_t i = 0; i < params.branches.size(); ++i) {
    Tensor fi = params.branches[i].forward(f0);
    fused_branches.push_back(params.branch_fuse[i].forward(fi));
  }
  Tensor fused = params.bn.forward(concat_channels(fused_branches), training);
  Tensor out = add(fused, params.skip.forward(input));
  return relu(out);
}

}  // namespace msgnet
