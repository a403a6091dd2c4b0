#pragma once

// Network building blocks on top of the autograd tensor: convolution, linear,
// batch normalization, parameter bookkeeping and optimizers.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msgnet/tensor.hpp"

namespace msgnet {

struct Conv2dSpec {
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_h = 0, pad_w = 0;
  int64_t dilation_h = 1, dilation_w = 1;
};

// x (N, Cin, H, W) * w (Cout, Cin, kh, kw) + b (Cout) -> (N, Cout, Ho, Wo).
// Bias may be an undefined Tensor to skip it.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec);

// x (B, Fin) * w (Fout, Fin)^T + b -> (B, Fout). Bias optional as above.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Ordered parameter/buffer collection for optimizers and checkpoints.
struct ParamRegistry {
  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<std::pair<std::string, Tensor>> buffers;

  void add_param(const std::string& name, const Tensor& t) { params.emplace_back(name, t); }
  void add_buffer(const std::string& name, const Tensor& t) { buffers.emplace_back(name, t); }
  std::vector<Tensor> param_tensors() const;
  // Copies values from `other` entry-wise by key; throws on missing/size mismatch.
  void load_values(const std::map<std::string, std::vector<double>>& state);
  std::map<std::string, std::vector<double>> dump_values() const;
};

// He-normal initialized convolution layer.
struct Conv2d {
  Tensor weight;  // (Cout, Cin, kh, kw)
  Tensor bias;    // (Cout)
  Conv2dSpec spec;

  Conv2d() = default;
  Conv2d(int64_t cin, int64_t cout, int64_t kh, int64_t kw, std::mt19937_64& rng,
         Conv2dSpec spec = {}, bool zero_init = false);
  static Conv2d same(int64_t cin, int64_t cout, int64_t k, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, spec); }
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
  int64_t param_count() const { return weight.numel() + bias.numel(); }
};

struct Linear {
  Tensor weight;  // (Fout, Fin)
  Tensor bias;    // (Fout)

  Linear() = default;
  Linear(int64_t fin, int64_t fout, std::mt19937_64& rng, bool zero_init = false);

  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
};

// Per-channel batch normalization over (N, H, W). Training mode normalizes by
// batch statistics and updates running estimates; eval mode uses the running
// estimates. momentum is the running-average update fraction.
struct BatchNorm2d {
  Tensor gamma, beta;
  Tensor running_mean, running_var;  // buffers
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int64_t channels);

  // Non-const: training mode updates the running statistics in place.
  Tensor forward(const Tensor& x, bool training);
  void register_into(ParamRegistry& reg, const std::string& prefix) const;
  int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

// ---- optimizers ----

struct SGD {
  double lr = 1e-4;
  double momentum = 0.9;

  explicit SGD(std::vector<Tensor> params, double lr = 1e-4, double momentum = 0.9);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(std::vector<Tensor> params, double lr = 1e-3);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace msgnet
