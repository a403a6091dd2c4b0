#include "msgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace msgnet {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

namespace detail {

double* Node::grad_data() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

NoGradGuard::NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
NoGradGuard::~NoGradGuard() { detail::grad_mode() = prev_; }

namespace {

using detail::Node;

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

// Wires the tape when grad mode is on and any parent requires grad.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backprop) {
  auto n = make_node(std::move(shape), std::move(value));
  if (detail::grad_mode()) {
    bool any = false;
    for (const auto& p : parents)
      if (p->requires_grad) any = true;
    if (any) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backprop = std::move(backprop);
    }
  }
  return Tensor(n);
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape) {
  return Tensor(make_node(shape, std::vector<double>(msgnet::numel(shape), 0.0)));
}

Tensor Tensor::full(const Shape& shape, double v) {
  return Tensor(make_node(shape, std::vector<double>(msgnet::numel(shape), v)));
}

Tensor Tensor::from_vector(const Shape& shape, std::vector<double> data) {
  check(static_cast<int64_t>(data.size()) == msgnet::numel(shape),
        "from_vector: data size does not match shape " + shape_str(shape));
  return Tensor(make_node(shape, std::move(data)));
}

Tensor Tensor::randn(const Shape& shape, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(msgnet::numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(make_node(shape, std::move(v)));
}

Tensor Tensor::uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(msgnet::numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(make_node(shape, std::move(v)));
}

Tensor Tensor::scalar(double v) { return Tensor(make_node({1}, {v})); }

int64_t Tensor::dim(int i) const {
  check(i >= 0 && i < static_cast<int>(node_->shape.size()), "dim index out of range");
  return node_->shape[i];
}

double Tensor::item() const {
  check(numel() == 1, "item() requires a single-element tensor");
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
  node_->requires_grad = v;
  return *this;
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

void Tensor::backward(const std::vector<double>* seed) const {
  auto& root = *node_;
  if (seed) {
    check(seed->size() == root.value.size(), "backward: seed size mismatch");
    root.grad = *seed;
  } else {
    check(root.numel() == 1, "backward without seed requires a scalar");
    root.grad.assign(1, 1.0);
  }

  // Iterative post-order DFS over parent edges.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // order is post-order: parents before children; walk it backwards.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
      n->backprop(*n);
    }
  }
}

Tensor Tensor::reshape(const Shape& new_shape) const {
  check(msgnet::numel(new_shape) == numel(), "reshape: element count mismatch " + shape_str(shape()) +
                                         " -> " + shape_str(new_shape));
  auto src = node_;
  return make_result(new_shape, node_->value, {node_}, [src](Node& out) {
    double* pg = src->grad_data();
    for (size_t i = 0; i < out.grad.size(); ++i) pg[i] += out.grad[i];
  });
}

Tensor Tensor::detach_copy() const { return Tensor(make_node(node_->shape, node_->value)); }

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> v(a.numel());
  auto av = a.data(), bv = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      double* g = an->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
    if (bn->requires_grad) {
      double* g = bn->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> v(a.numel());
  auto av = a.data(), bv = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      double* g = an->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
    }
    if (bn->requires_grad) {
      double* g = bn->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] -= out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> v(a.numel());
  auto av = a.data(), bv = b.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      double* g = an->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      double* g = bn->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * an->value[i];
    }
  });
}

namespace {

Tensor min_max_impl(const Tensor& a, const Tensor& b, bool take_min) {
  check_same_shape(a, b, take_min ? "minimum" : "maximum");
  std::vector<double> v(a.numel());
  auto av = a.data(), bv = b.data();
  // mask records whether a won (ties go to a).
  auto mask = std::make_shared<std::vector<uint8_t>>(a.numel());
  for (size_t i = 0; i < v.size(); ++i) {
    bool a_wins = take_min ? (av[i] <= bv[i]) : (av[i] >= bv[i]);
    (*mask)[i] = a_wins;
    v[i] = a_wins ? av[i] : bv[i];
  }
  auto an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(v), {an, bn}, [an, bn, mask](Node& out) {
    for (size_t i = 0; i < out.grad.size(); ++i) {
      if ((*mask)[i]) {
        if (an->requires_grad) an->grad_data()[i] += out.grad[i];
      } else {
        if (bn->requires_grad) bn->grad_data()[i] += out.grad[i];
      }
    }
  });
}

}  // namespace

Tensor minimum(const Tensor& a, const Tensor& b) { return min_max_impl(a, b, true); }
Tensor maximum(const Tensor& a, const Tensor& b) { return min_max_impl(a, b, false); }

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> v(a.numel());
  auto av = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = av[i] + s;
  auto an = a.node();
  return make_result(a.shape(), std::move(v), {an}, [an](Node& out) {
    double* g = an->grad_data();
    for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
  });
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> v(a.numel());
  auto av = a.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = av[i] * s;
  auto an = a.node();
  return make_result(a.shape(), std::move(v), {an, }, [an, s](Node& out) {
    double* g = an->grad_data();
    for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * s;
  });
}

namespace {

// Shared scaffold for unary elementwise ops: f computes value, df computes
// d(out)/d(in) from (x, y).
template <typename F, typename DF>
Tensor unary_op(const Tensor& x, F f, DF df) {
  std::vector<double> v(x.numel());
  auto xv = x.data();
  for (size_t i = 0; i < v.size(); ++i) v[i] = f(xv[i]);
  auto xn = x.node();
  return make_result(x.shape(), std::move(v), {xn}, [xn, df](Node& out) {
    double* g = xn->grad_data();
    for (size_t i = 0; i < out.grad.size(); ++i)
      g[i] += out.grad[i] * df(xn->value[i], out.value[i]);
  });
}

}  // namespace

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double a) { return a > 0 ? a : 0.0; },
      [](double a, double) { return a > 0 ? 1.0 : 0.0; });
}

Tensor silu(const Tensor& x) {
  return unary_op(
      x,
      [](double a) { return a / (1.0 + std::exp(-a)); },
      [](double a, double) {
        double s = 1.0 / (1.0 + std::exp(-a));
        return s * (1.0 + a * (1.0 - s));
      });
}

Tensor tanh_op(const Tensor& x) {
  return unary_op(
      x, [](double a) { return std::tanh(a); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, [](double a) { return 1.0 / (1.0 + std::exp(-a)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_op(const Tensor& x) {
  return unary_op(
      x, [](double a) { return std::exp(a); }, [](double, double y) { return y; });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      x,
      [](double a) { return a > 30.0 ? a : std::log1p(std::exp(a)); },
      [](double a, double) { return 1.0 / (1.0 + std::exp(-a)); });
}

Tensor abs_op(const Tensor& x) {
  return unary_op(
      x, [](double a) { return std::fabs(a); },
      [](double a, double) { return a >= 0 ? 1.0 : -1.0; });
}

Tensor clamp01(const Tensor& x) {
  return unary_op(
      x, [](double a) { return a < 0.0 ? 0.0 : (a > 1.0 ? 1.0 : a); },
      [](double a, double) { return (a >= 0.0 && a <= 1.0) ? 1.0 : 0.0; });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto xn = x.node();
  return make_result({1}, {s}, {xn}, [xn](Node& out) {
    double* g = xn->grad_data();
    double og = out.grad[0];
    for (size_t i = 0; i < xn->value.size(); ++i) g[i] += og;
  });
}

Tensor mean_all(const Tensor& x) {
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  check(!xs.empty(), "concat_channels: empty input list");
  const Shape& s0 = xs[0].shape();
  check(s0.size() == 4, "concat_channels expects 4-D tensors");
  int64_t n = s0[0], h = s0[2], w = s0[3];
  int64_t ctot = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    check(s.size() == 4 && s[0] == n && s[2] == h && s[3] == w,
          "concat_channels: incompatible shape " + shape_str(s));
    ctot += s[1];
  }
  std::vector<double> v(static_cast<size_t>(n * ctot * h * w));
  int64_t plane = h * w;
  int64_t coff = 0;
  for (const auto& x : xs) {
    int64_t c = x.dim(1);
    auto xv = x.data();
    for (int64_t b = 0; b < n; ++b) {
      std::copy(xv.begin() + b * c * plane, xv.begin() + (b + 1) * c * plane,
                v.begin() + (b * ctot + coff) * plane);
    }
    coff += c;
  }
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& x : xs) parents.push_back(x.node());
  return make_result({n, ctot, h, w}, std::move(v), parents,
                     [parents, n, ctot, plane](Node& out) {
                       int64_t coff2 = 0;
                       for (const auto& p : parents) {
                         int64_t c = p->shape[1];
                         if (p->requires_grad) {
                           double* g = p->grad_data();
                           for (int64_t b = 0; b < n; ++b) {
                             const double* src = out.grad.data() + (b * ctot + coff2) * plane;
                             double* dst = g + b * c * plane;
                             for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                           }
                         }
                         coff2 += c;
                       }
                     });
}

Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1) {
  const Shape& s = x.shape();
  check(s.size() == 4, "slice_channels expects a 4-D tensor");
  check(0 <= c0 && c0 < c1 && c1 <= s[1], "slice_channels: bad channel range");
  int64_t n = s[0], c = c1 - c0, h = s[2], w = s[3], plane = h * w;
  std::vector<double> v(static_cast<size_t>(n * c * plane));
  auto xv = x.data();
  for (int64_t b = 0; b < n; ++b)
    std::copy(xv.begin() + (b * s[1] + c0) * plane, xv.begin() + (b * s[1] + c1) * plane,
              v.begin() + b * c * plane);
  auto xn = x.node();
  int64_t ctot = s[1];
  return make_result({n, c, h, w}, std::move(v), {xn}, [xn, n, c, c0, ctot, plane](Node& out) {
    double* g = xn->grad_data();
    for (int64_t b = 0; b < n; ++b) {
      const double* src = out.grad.data() + b * c * plane;
      double* dst = g + (b * ctot + c0) * plane;
      for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
    }
  });
}

Tensor upsample_nearest2x(const Tensor& x) {
  const Shape& s = x.shape();
  check(s.size() == 4, "upsample_nearest2x expects a 4-D tensor");
  int64_t n = s[0], c = s[1], h = s[2], w = s[3];
  int64_t ho = h * 2, wo = w * 2;
  std::vector<double> v(static_cast<size_t>(n * c * ho * wo));
  auto xv = x.data();
  for (int64_t bc = 0; bc < n * c; ++bc) {
    const double* in = xv.data() + bc * h * w;
    double* out = v.data() + bc * ho * wo;
    for (int64_t i = 0; i < ho; ++i)
      for (int64_t j = 0; j < wo; ++j) out[i * wo + j] = in[(i / 2) * w + (j / 2)];
  }
  auto xn = x.node();
  return make_result({n, c, ho, wo}, std::move(v), {xn}, [xn, n, c, h, w](Node& out) {
    int64_t ho = h * 2, wo = w * 2;
    double* g = xn->grad_data();
    for (int64_t bc = 0; bc < n * c; ++bc) {
      const double* og = out.grad.data() + bc * ho * wo;
      double* ig = g + bc * h * w;
      for (int64_t i = 0; i < ho; ++i)
        for (int64_t j = 0; j < wo; ++j) ig[(i / 2) * w + (j / 2)] += og[i * wo + j];
    }
  });
}

Tensor broadcast_spatial(const Tensor& v, int64_t h, int64_t w) {
  const Shape& s = v.shape();
  check(s.size() == 2, "broadcast_spatial expects a (B, C) tensor");
  int64_t n = s[0], c = s[1], plane = h * w;
  std::vector<double> out(static_cast<size_t>(n * c * plane));
  auto vv = v.data();
  for (int64_t bc = 0; bc < n * c; ++bc)
    std::fill(out.begin() + bc * plane, out.begin() + (bc + 1) * plane, vv[bc]);
  auto vn = v.node();
  return make_result({n, c, h, w}, std::move(out), {vn}, [vn, plane](Node& o) {
    double* g = vn->grad_data();
    for (size_t bc = 0; bc < vn->value.size(); ++bc) {
      double acc = 0.0;
      const double* src = o.grad.data() + bc * plane;
      for (int64_t i = 0; i < plane; ++i) acc += src[i];
      g[bc] += acc;
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  check(s.size() == 4, "global_avg_pool expects a 4-D tensor");
  int64_t n = s[0], c = s[1], plane = s[2] * s[3];
  std::vector<double> v(static_cast<size_t>(n * c));
  auto xv = x.data();
  for (int64_t bc = 0; bc < n * c; ++bc) {
    double acc = 0.0;
    const double* src = xv.data() + bc * plane;
    for (int64_t i = 0; i < plane; ++i) acc += src[i];
    v[bc] = acc / static_cast<double>(plane);
  }
  auto xn = x.node();
  return make_result({n, c}, std::move(v), {xn}, [xn, plane](Node& out) {
    double* g = xn->grad_data();
    double inv = 1.0 / static_cast<double>(plane);
    for (size_t bc = 0; bc < out.grad.size(); ++bc) {
      double og = out.grad[bc] * inv;
      double* dst = g + bc * plane;
      for (int64_t i = 0; i < plane; ++i) dst[i] += og;
    }
  });
}

Tensor gather_positions(const Tensor& x, const std::vector<SpatialIndex>& idx) {
  const Shape& s = x.shape();
  check(s.size() == 4, "gather_positions expects a 4-D tensor");
  int64_t c = s[1], h = s[2], w = s[3];
  int64_t p = static_cast<int64_t>(idx.size());
  std::vector<double> v(static_cast<size_t>(p * c));
  auto xv = x.data();
  for (int64_t r = 0; r < p; ++r) {
    const auto& t = idx[r];
    check(t.b >= 0 && t.b < s[0] && t.i >= 0 && t.i < h && t.j >= 0 && t.j < w,
          "gather_positions: index out of range");
    for (int64_t ch = 0; ch < c; ++ch)
      v[r * c + ch] = xv[((t.b * c + ch) * h + t.i) * w + t.j];
  }
  auto xn = x.node();
  auto indices = std::make_shared<std::vector<SpatialIndex>>(idx);
  return make_result({p, c}, std::move(v), {xn}, [xn, indices, c, h, w](Node& out) {
    double* g = xn->grad_data();
    for (size_t r = 0; r < indices->size(); ++r) {
      const auto& t = (*indices)[r];
      for (int64_t ch = 0; ch < c; ++ch)
        g[((t.b * c + ch) * h + t.i) * w + t.j] += out.grad[r * c + ch];
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  check_same_shape(logits, targets, "bce_with_logits");
  std::vector<double> v(logits.numel());
  auto x = logits.data(), z = targets.data();
  for (size_t i = 0; i < v.size(); ++i) {
    double xi = x[i];
    v[i] = std::max(xi, 0.0) - xi * z[i] + std::log1p(std::exp(-std::fabs(xi)));
  }
  auto ln = logits.node(), tn = targets.node();
  return make_result(logits.shape(), std::move(v), {ln, tn}, [ln, tn](Node& out) {
    if (ln->requires_grad) {
      double* g = ln->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-ln->value[i]));
        g[i] += out.grad[i] * (s - tn->value[i]);
      }
    }
    if (tn->requires_grad) {
      double* g = tn->grad_data();
      for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i] * (-ln->value[i]);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  check(s.size() == 2, "cross_entropy expects (B, K) logits");
  int64_t b = s[0], k = s[1];
  check(static_cast<int64_t>(labels.size()) == b, "cross_entropy: label count mismatch");
  auto x = logits.data();
  double loss = 0.0;
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(b * k));
  for (int64_t r = 0; r < b; ++r) {
    check(labels[r] >= 0 && labels[r] < k, "cross_entropy: label out of range");
    const double* row = x.data() + r * k;
    double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    double logdenom = std::log(denom) + mx;
    loss += logdenom - row[labels[r]];
    for (int64_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(row[j] - logdenom);
  }
  loss /= static_cast<double>(b);
  auto ln = logits.node();
  auto lab = std::make_shared<std::vector<int>>(labels);
  return make_result({1}, {loss}, {ln}, [ln, lab, probs, b, k](Node& out) {
    double* g = ln->grad_data();
    double scale = out.grad[0] / static_cast<double>(b);
    for (int64_t r = 0; r < b; ++r)
      for (int64_t j = 0; j < k; ++j)
        g[r * k + j] += scale * ((*probs)[r * k + j] - (j == (*lab)[r] ? 1.0 : 0.0));
  });
}

Tensor l1_loss(const Tensor& a, const Tensor& b) { return mean_all(abs_op(sub(a, b))); }

Tensor softmax_rows(const Tensor& x) {
  const Shape& s = x.shape();
  check(s.size() == 2, "softmax_rows expects a (B, K) tensor");
  int64_t b = s[0], k = s[1];
  std::vector<double> v(x.numel());
  auto xv = x.data();
  for (int64_t r = 0; r < b; ++r) {
    const double* row = xv.data() + r * k;
    double mx = *std::max_element(row, row + k);
    double denom = 0.0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    for (int64_t j = 0; j < k; ++j) v[r * k + j] = std::exp(row[j] - mx) / denom;
  }
  auto xn = x.node();
  return make_result(x.shape(), std::move(v), {xn}, [xn, b, k](Node& out) {
    double* g = xn->grad_data();
    for (int64_t r = 0; r < b; ++r) {
      const double* y = out.value.data() + r * k;
      const double* og = out.grad.data() + r * k;
      double dot = 0.0;
      for (int64_t j = 0; j < k; ++j) dot += og[j] * y[j];
      for (int64_t j = 0; j < k; ++j) g[r * k + j] += y[j] * (og[j] - dot);
    }
  });
}

}  // namespace msgnet
