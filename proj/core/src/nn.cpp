#include "msgnet/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace msgnet {

namespace {

using detail::Node;
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using CMapRM = Eigen::Map<const MatrixRM>;

struct ConvDims {
  int64_t n, cin, h, w;
  int64_t cout, kh, kw;
  int64_t ho, wo;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, const Conv2dSpec& sp) {
  check(xs.size() == 4, "conv2d: input must be 4-D, got " + shape_str(xs));
  check(ws.size() == 4, "conv2d: weight must be 4-D, got " + shape_str(ws));
  check(xs[1] == ws[1], "conv2d: input channels " + std::to_string(xs[1]) +
                            " do not match weight channels " + std::to_string(ws[1]));
  ConvDims d;
  d.n = xs[0];
  d.cin = xs[1];
  d.h = xs[2];
  d.w = xs[3];
  d.cout = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  int64_t eff_kh = sp.dilation_h * (d.kh - 1) + 1;
  int64_t eff_kw = sp.dilation_w * (d.kw - 1) + 1;
  d.ho = (d.h + 2 * sp.pad_h - eff_kh) / sp.stride_h + 1;
  d.wo = (d.w + 2 * sp.pad_w - eff_kw) / sp.stride_w + 1;
  check(d.ho > 0 && d.wo > 0, "conv2d: output would be empty for input " + shape_str(xs));
  return d;
}

// col is (Cin*kh*kw, Ho*Wo) row-major for one image.
void im2col(const double* img, const ConvDims& d, const Conv2dSpec& sp, double* col) {
  int64_t plane = d.h * d.w;
  int64_t owo = d.ho * d.wo;
  for (int64_t c = 0; c < d.cin; ++c) {
    for (int64_t ki = 0; ki < d.kh; ++ki) {
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        double* dst = col + ((c * d.kh + ki) * d.kw + kj) * owo;
        for (int64_t oi = 0; oi < d.ho; ++oi) {
          int64_t ii = oi * sp.stride_h - sp.pad_h + ki * sp.dilation_h;
          if (ii < 0 || ii >= d.h) {
            std::fill(dst + oi * d.wo, dst + (oi + 1) * d.wo, 0.0);
            continue;
          }
          const double* src_row = img + c * plane + ii * d.w;
          for (int64_t oj = 0; oj < d.wo; ++oj) {
            int64_t jj = oj * sp.stride_w - sp.pad_w + kj * sp.dilation_w;
            dst[oi * d.wo + oj] = (jj < 0 || jj >= d.w) ? 0.0 : src_row[jj];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvDims& d, const Conv2dSpec& sp, double* img) {
  int64_t plane = d.h * d.w;
  int64_t owo = d.ho * d.wo;
  for (int64_t c = 0; c < d.cin; ++c) {
    for (int64_t ki = 0; ki < d.kh; ++ki) {
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        const double* src = col + ((c * d.kh + ki) * d.kw + kj) * owo;
        for (int64_t oi = 0; oi < d.ho; ++oi) {
          int64_t ii = oi * sp.stride_h - sp.pad_h + ki * sp.dilation_h;
          if (ii < 0 || ii >= d.h) continue;
          double* dst_row = img + c * plane + ii * d.w;
          for (int64_t oj = 0; oj < d.wo; ++oj) {
            int64_t jj = oj * sp.stride_w - sp.pad_w + kj * sp.dilation_w;
            if (jj >= 0 && jj < d.w) dst_row[jj] += src[oi * d.wo + oj];
          }
        }
      }
    }
  }
}

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
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

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec) {
  ConvDims d = conv_dims(x.shape(), w.shape(), spec);
  bool has_bias = b.defined();
  if (has_bias)
    check(b.shape() == Shape{d.cout}, "conv2d: bias shape must be (Cout)");

  int64_t kdim = d.cin * d.kh * d.kw;
  int64_t owo = d.ho * d.wo;
  std::vector<double> out(static_cast<size_t>(d.n * d.cout * owo));
  auto xv = x.data();
  auto wv = w.data();

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t bi = 0; bi < d.n; ++bi) {
    std::vector<double> col(static_cast<size_t>(kdim * owo));
    im2col(xv.data() + bi * d.cin * d.h * d.w, d, spec, col.data());
    CMapRM wm(wv.data(), d.cout, kdim);
    CMapRM cm(col.data(), kdim, owo);
    MapRM om(out.data() + bi * d.cout * owo, d.cout, owo);
    om.noalias() = wm * cm;
  }
  if (has_bias) {
    auto bv = b.data();
    for (int64_t bi = 0; bi < d.n; ++bi)
      for (int64_t co = 0; co < d.cout; ++co) {
        double add = bv[co];
        double* dst = out.data() + (bi * d.cout + co) * owo;
        for (int64_t i = 0; i < owo; ++i) dst[i] += add;
      }
  }

  auto xn = x.node();
  auto wn = w.node();
  std::vector<std::shared_ptr<Node>> parents{xn, wn};
  std::shared_ptr<Node> bn;
  if (has_bias) {
    bn = b.node();
    parents.push_back(bn);
  }
  Conv2dSpec sp = spec;
  return make_result(
      {d.n, d.cout, d.ho, d.wo}, std::move(out), parents, [xn, wn, bn, d, sp](Node& o) {
        int64_t kdim = d.cin * d.kh * d.kw;
        int64_t owo = d.ho * d.wo;
        bool need_x = xn->requires_grad;
        bool need_w = wn->requires_grad;
        double* xg = need_x ? xn->grad_data() : nullptr;
        double* wg = need_w ? wn->grad_data() : nullptr;

        // weight grad accumulated into per-thread buffers, reduced in thread
        // order so the summation order is fixed for a given thread count.
        int nthreads = 1;
#ifdef _OPENMP
        nthreads = omp_get_max_threads();
#endif
        std::vector<std::vector<double>> wg_local(
            need_w ? nthreads : 0, std::vector<double>(need_w ? d.cout * kdim : 0, 0.0));

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int64_t bi = 0; bi < d.n; ++bi) {
          int tid = 0;
#ifdef _OPENMP
          tid = omp_get_thread_num();
#endif
          std::vector<double> col(static_cast<size_t>(kdim * owo));
          im2col(xn->value.data() + bi * d.cin * d.h * d.w, d, sp, col.data());
          CMapRM og(o.grad.data() + bi * d.cout * owo, d.cout, owo);
          if (need_w) {
            MapRM wgm(wg_local[tid].data(), d.cout, kdim);
            CMapRM cm(col.data(), kdim, owo);
            wgm.noalias() += og * cm.transpose();
          }
          if (need_x) {
            std::vector<double> dcol(static_cast<size_t>(kdim * owo));
            CMapRM wm(wn->value.data(), d.cout, kdim);
            MapRM dcm(dcol.data(), kdim, owo);
            dcm.noalias() = wm.transpose() * og;
            col2im_add(dcol.data(), d, sp, xg + bi * d.cin * d.h * d.w);
          }
        }
        if (need_w) {
          for (int t = 0; t < nthreads; ++t)
            for (int64_t i = 0; i < d.cout * kdim; ++i) wg[i] += wg_local[t][i];
        }
        if (bn && bn->requires_grad) {
          double* bg = bn->grad_data();
          for (int64_t bi = 0; bi < d.n; ++bi)
            for (int64_t co = 0; co < d.cout; ++co) {
              const double* src = o.grad.data() + (bi * d.cout + co) * owo;
              double acc = 0.0;
              for (int64_t i = 0; i < owo; ++i) acc += src[i];
              bg[co] += acc;
            }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  check(xs.size() == 2 && ws.size() == 2, "linear expects (B, Fin) and (Fout, Fin)");
  check(xs[1] == ws[1], "linear: feature dims mismatch " + shape_str(xs) + " vs " + shape_str(ws));
  int64_t bsz = xs[0], fin = xs[1], fout = ws[0];
  bool has_bias = b.defined();
  if (has_bias) check(b.shape() == Shape{fout}, "linear: bias shape must be (Fout)");

  std::vector<double> out(static_cast<size_t>(bsz * fout));
  {
    CMapRM xm(x.data().data(), bsz, fin);
    CMapRM wm(w.data().data(), fout, fin);
    MapRM om(out.data(), bsz, fout);
    om.noalias() = xm * wm.transpose();
  }
  if (has_bias) {
    auto bv = b.data();
    for (int64_t r = 0; r < bsz; ++r)
      for (int64_t c = 0; c < fout; ++c) out[r * fout + c] += bv[c];
  }
  auto xn = x.node(), wn = w.node();
  std::vector<std::shared_ptr<Node>> parents{xn, wn};
  std::shared_ptr<Node> bn;
  if (has_bias) {
    bn = b.node();
    parents.push_back(bn);
  }
  return make_result({bsz, fout}, std::move(out), parents, [xn, wn, bn, bsz, fin, fout](Node& o) {
    CMapRM og(o.grad.data(), bsz, fout);
    if (xn->requires_grad) {
      MapRM xg(xn->grad_data(), bsz, fin);
      CMapRM wm(wn->value.data(), fout, fin);
      xg.noalias() += og * wm;
    }
    if (wn->requires_grad) {
      MapRM wgm(wn->grad_data(), fout, fin);
      CMapRM xm(xn->value.data(), bsz, fin);
      wgm.noalias() += og.transpose() * xm;
    }
    if (bn && bn->requires_grad) {
      double* bg = bn->grad_data();
      for (int64_t r = 0; r < bsz; ++r)
        for (int64_t c = 0; c < fout; ++c) bg[c] += o.grad[r * fout + c];
    }
  });
}

std::vector<Tensor> ParamRegistry::param_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

void ParamRegistry::load_values(const std::map<std::string, std::vector<double>>& state) {
  auto load = [&](const std::string& name, Tensor t) {
    auto it = state.find(name);
    check(it != state.end(), "checkpoint is missing entry '" + name + "'");
    check(it->second.size() == static_cast<size_t>(t.numel()),
          "checkpoint entry '" + name + "' has wrong size");
    std::copy(it->second.begin(), it->second.end(), t.data().begin());
  };
  for (auto& [name, t] : params) load(name, t);
  for (auto& [name, t] : buffers) load(name, t);
}

std::map<std::string, std::vector<double>> ParamRegistry::dump_values() const {
  std::map<std::string, std::vector<double>> out;
  auto dump = [&](const std::string& name, const Tensor& t) {
    check(!out.count(name), "duplicate parameter name '" + name + "'");
    out[name] = std::vector<double>(t.data().begin(), t.data().end());
  };
  for (const auto& [name, t] : params) dump(name, t);
  for (const auto& [name, t] : buffers) dump(name, t);
  return out;
}

Conv2d::Conv2d(int64_t cin, int64_t cout, int64_t kh, int64_t kw, std::mt19937_64& rng,
               Conv2dSpec sp, bool zero_init)
    : spec(sp) {
  check(cin >= 1 && cout >= 1 && kh >= 1 && kw >= 1, "Conv2d: sizes must be positive");
  double fan_in = static_cast<double>(cin * kh * kw);
  double stddev = std::sqrt(2.0 / fan_in);
  weight = zero_init ? Tensor::zeros({cout, cin, kh, kw})
                     : Tensor::randn({cout, cin, kh, kw}, rng, stddev);
  bias = Tensor::zeros({cout});
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
}

Conv2d Conv2d::same(int64_t cin, int64_t cout, int64_t k, std::mt19937_64& rng) {
  check(k % 2 == 1, "Conv2d::same requires an odd kernel");
  Conv2dSpec sp;
  sp.pad_h = sp.pad_w = (k - 1) / 2;
  return Conv2d(cin, cout, k, k, rng, sp);
}

void Conv2d::register_into(ParamRegistry& reg, const std::string& prefix) const {
  reg.add_param(prefix + ".weight", weight);
  reg.add_param(prefix + ".bias", bias);
}

Linear::Linear(int64_t fin, int64_t fout, std::mt19937_64& rng, bool zero_init) {
  double stddev = std::sqrt(2.0 / static_cast<double>(fin));
  weight = zero_init ? Tensor::zeros({fout, fin}) : Tensor::randn({fout, fin}, rng, stddev);
  bias = Tensor::zeros({fout});
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
}

void Linear::register_into(ParamRegistry& reg, const std::string& prefix) const {
  reg.add_param(prefix + ".weight", weight);
  reg.add_param(prefix + ".bias", bias);
}

BatchNorm2d::BatchNorm2d(int64_t channels) {
  gamma = Tensor::full({channels}, 1.0);
  beta = Tensor::zeros({channels});
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
  running_mean = Tensor::zeros({channels});
  running_var = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  const Shape& s = x.shape();
  check(s.size() == 4, "BatchNorm2d expects a 4-D tensor");
  check(s[1] == gamma.numel(), "BatchNorm2d: channel mismatch");
  int64_t n = s[0], c = s[1], plane = s[2] * s[3];
  int64_t cnt = n * plane;
  auto xv = x.data();

  std::vector<double> mean(c), invstd(c);
  if (training) {
    for (int64_t ch = 0; ch < c; ++ch) {
      double m = 0.0;
      for (int64_t b = 0; b < n; ++b) {
        const double* src = xv.data() + (b * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) m += src[i];
      }
      m /= static_cast<double>(cnt);
      double var = 0.0;
      for (int64_t b = 0; b < n; ++b) {
        const double* src = xv.data() + (b * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          double d = src[i] - m;
          var += d * d;
        }
      }
      var /= static_cast<double>(cnt);
      mean[ch] = m;
      invstd[ch] = 1.0 / std::sqrt(var + eps);
      // biased variance for normalization, unbiased-ish update kept simple
      running_mean.data()[ch] = (1.0 - momentum) * running_mean.data()[ch] + momentum * m;
      running_var.data()[ch] = (1.0 - momentum) * running_var.data()[ch] + momentum * var;
    }
  } else {
    for (int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean.data()[ch];
      invstd[ch] = 1.0 / std::sqrt(running_var.data()[ch] + eps);
    }
  }

  std::vector<double> out(x.numel());
  auto gv = gamma.data();
  auto bv = beta.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* src = xv.data() + (b * c + ch) * plane;
      double* dst = out.data() + (b * c + ch) * plane;
      double m = mean[ch], is = invstd[ch], g = gv[ch], be = bv[ch];
      for (int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - m) * is * g + be;
    }

  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  auto mean_s = std::make_shared<std::vector<double>>(std::move(mean));
  auto invstd_s = std::make_shared<std::vector<double>>(std::move(invstd));
  bool train_flag = training;
  auto res = [xn, gn, bn, mean_s, invstd_s, n, c, plane, train_flag](Node& o) {
    int64_t cnt = n * plane;
    for (int64_t ch = 0; ch < c; ++ch) {
      double m = (*mean_s)[ch], is = (*invstd_s)[ch];
      double g = gn->value[ch];
      // accumulate per-channel reductions of dy and dy*xhat
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int64_t b = 0; b < n; ++b) {
        const double* og = o.grad.data() + (b * c + ch) * plane;
        const double* xval = xn->value.data() + (b * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          double xhat = (xval[i] - m) * is;
          sum_dy += og[i];
          sum_dy_xhat += og[i] * xhat;
        }
      }
      if (gn->requires_grad) gn->grad_data()[ch] += sum_dy_xhat;
      if (bn->requires_grad) bn->grad_data()[ch] += sum_dy;
      if (xn->requires_grad) {
        double* xg = xn->grad_data();
        for (int64_t b = 0; b < n; ++b) {
          const double* og = o.grad.data() + (b * c + ch) * plane;
          const double* xval = xn->value.data() + (b * c + ch) * plane;
          double* dst = xg + (b * c + ch) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            double xhat = (xval[i] - m) * is;
            if (train_flag) {
              dst[i] += g * is *
                        (og[i] - sum_dy / cnt - xhat * sum_dy_xhat / cnt);
            } else {
              dst[i] += g * is * og[i];
            }
          }
        }
      }
    }
  };
  auto node = std::make_shared<Node>();
  node->shape = s;
  node->value = std::move(out);
  if (detail::grad_mode() && (xn->requires_grad || gn->requires_grad || bn->requires_grad)) {
    node->requires_grad = true;
    node->parents = {xn, gn, bn};
    node->backprop = res;
  }
  return Tensor(node);
}

void BatchNorm2d::register_into(ParamRegistry& reg, const std::string& prefix) const {
  reg.add_param(prefix + ".gamma", gamma);
  reg.add_param(prefix + ".beta", beta);
  reg.add_buffer(prefix + ".running_mean", running_mean);
  reg.add_buffer(prefix + ".running_var", running_var);
}

SGD::SGD(std::vector<Tensor> params, double lr_, double momentum_)
    : lr(lr_), momentum(momentum_), params_(std::move(params)) {
  velocity_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i)
    velocity_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
}

void SGD::step() {
  for (size_t i = 0; i < params_.size(); ++i) {
    auto g = params_[i].grad();
    auto v = params_[i].data();
    auto& vel = velocity_[i];
    for (size_t k = 0; k < vel.size(); ++k) {
      vel[k] = momentum * vel[k] + g[k];
      v[k] -= lr * vel[k];
    }
  }
}

void SGD::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Adam::Adam(std::vector<Tensor> params, double lr_) : lr(lr_), params_(std::move(params)) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
    v_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto g = params_[i].grad();
    auto val = params_[i].data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t k = 0; k < m.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      val[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace msgnet
