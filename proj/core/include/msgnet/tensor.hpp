#pragma once

// Dense double-precision tensors with reverse-mode automatic differentiation.
// Every operation builds a dynamic tape; Tensor::backward() walks it once in
// reverse topological order. Values are NCHW-contiguous where 4-D semantics
// apply. Double precision keeps finite-difference checks meaningful.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace msgnet {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Throws std::invalid_argument with the given message when cond is false.
void check(bool cond, const std::string& msg);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates into parents' grad given this node's grad. Null for leaves.
  std::function<void(Node&)> backprop;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
  double* grad_data();  // allocates zeroed grad on first use
};

bool& grad_mode();

}  // namespace detail

// Disables tape construction within a scope (inference / value-only code).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double v);
  static Tensor from_vector(const Shape& shape, std::vector<double> data);
  static Tensor randn(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0);
  static Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim(int i) const;
  int64_t numel() const { return node_->numel(); }

  std::span<double> data() { return {node_->value.data(), node_->value.size()}; }
  std::span<const double> data() const { return {node_->value.data(), node_->value.size()}; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool v);
  std::span<const double> grad() const;
  void zero_grad();

  // Reverse-mode sweep from this node. The tensor must be scalar unless a
  // seed gradient of matching size is supplied.
  void backward(const std::vector<double>* seed = nullptr) const;

  // Value-sharing view with a new shape (same element count).
  Tensor reshape(const Shape& new_shape) const;
  // Deep copy detached from the tape.
  Tensor detach_copy() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---- elementwise arithmetic (matching shapes) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);  // ties take a's gradient
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// ---- elementwise unary ----
Tensor relu(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor abs_op(const Tensor& x);
Tensor clamp01(const Tensor& x);  // hard clamp to [0, 1]

// ---- reductions ----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// ---- movement ----
Tensor concat_channels(const std::vector<Tensor>& xs);            // dim 1 of NCHW
Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1);   // [c0, c1)
Tensor upsample_nearest2x(const Tensor& x);
// (B, C) -> (B, C, H, W) by repeating each value over the spatial grid.
Tensor broadcast_spatial(const Tensor& v, int64_t h, int64_t w);
// (B, C, H, W) -> (B, C) spatial mean.
Tensor global_avg_pool(const Tensor& x);
// Extract rows (b, :, i, j) for each index triple -> (P, C).
struct SpatialIndex {
  int64_t b, i, j;
};
Tensor gather_positions(const Tensor& x, const std::vector<SpatialIndex>& idx);

// ---- losses ----
// Elementwise binary cross-entropy on logits (numerically stable).
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);
// Mean cross-entropy of row-wise softmax vs integer labels; logits (B, K).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
Tensor l1_loss(const Tensor& a, const Tensor& b);
// Row-wise softmax for (B, K).
Tensor softmax_rows(const Tensor& x);

}  // namespace msgnet
