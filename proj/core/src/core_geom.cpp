#include "msgnet/core_geom.hpp"

#include <cmath>
#include <stdexcept>

namespace msgnet {

namespace {

using detail::Node;

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

void OffsetLimits::validate() const {
  if (!(std::isfinite(r_x) && std::isfinite(r_y) && std::isfinite(r)))
    throw std::domain_error("OffsetLimits: limits must be finite");
  if (r_x < 0 || r_y < 0 || r < 0)
    throw std::domain_error("OffsetLimits: limits must be non-negative");
  if (r < std::max(r_x, r_y))
    throw std::domain_error("OffsetLimits: requires r >= max(r_x, r_y)");
}

double chebyshev_distance(const Point2D& p, const Point2D& q) {
  if (!(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(q.x) && std::isfinite(q.y)))
    throw std::domain_error("chebyshev_distance: non-finite input point");
  return std::max(std::fabs(p.x - q.x), std::fabs(p.y - q.y));
}

OffsetField clamp_offsets(const Tensor& raw, const OffsetLimits& limits) {
  limits.validate();
  const Shape& s = raw.shape();
  check(s.size() == 5 && s[2] == 2,
        "clamp_offsets: raw offsets must be (batch, kernel_points, 2, H, W), got " +
            shape_str(s));
  int64_t plane = s[3] * s[4];
  auto rv = raw.data();

  // component 0 uses r_x, component 1 uses r_y
  const double lim[2] = {limits.r_x, limits.r_y};
  for (int comp = 0; comp < 2; ++comp) {
    if (lim[comp] > 0.0) continue;
    // zero limit only admits identically-zero raw entries
    for (int64_t bk = 0; bk < s[0] * s[1]; ++bk) {
      const double* src = rv.data() + (bk * 2 + comp) * plane;
      for (int64_t i = 0; i < plane; ++i)
        if (src[i] != 0.0)
          throw std::domain_error("clamp_offsets: zero limit with nonzero raw offset");
    }
  }

  std::vector<double> out(raw.numel());
  for (int64_t bk = 0; bk < s[0] * s[1]; ++bk)
    for (int comp = 0; comp < 2; ++comp) {
      const double* src = rv.data() + (bk * 2 + comp) * plane;
      double* dst = out.data() + (bk * 2 + comp) * plane;
      double l = lim[comp];
      if (l == 0.0) {
        std::fill(dst, dst + plane, 0.0);
      } else {
        for (int64_t i = 0; i < plane; ++i) dst[i] = l * std::tanh(src[i] / l);
      }
    }

  auto rn = raw.node();
  Shape shape = s;
  OffsetField field;
  double lx = limits.r_x, ly = limits.r_y;
  field.values = make_result(shape, std::move(out), {rn}, [rn, lx, ly, plane](Node& o) {
    const Shape& s = o.shape;
    double* g = rn->grad_data();
    const double lim2[2] = {lx, ly};
    for (int64_t bk = 0; bk < s[0] * s[1]; ++bk)
      for (int comp = 0; comp < 2; ++comp) {
        int64_t base = (bk * 2 + comp) * plane;
        double l = lim2[comp];
        if (l == 0.0) continue;
        for (int64_t i = 0; i < plane; ++i) {
          double th = o.value[base + i] / l;  // tanh(raw/l)
          g[base + i] += o.grad[base + i] * (1.0 - th * th);
        }
      }
  });
  field.limits = limits;
  return field;
}

Tensor bilinear_sample(const Tensor& map, const SamplingGrid& grid) {
  const Shape& ms = map.shape();
  const Shape& gs = grid.coords.shape();
  check(ms.size() == 4, "bilinear_sample: map must be (N, C, H, W)");
  check(gs.size() == 5 && gs[2] == 2, "bilinear_sample: grid must be (N, K, 2, H', W')");
  check(gs[0] == ms[0], "bilinear_sample: batch mismatch");
  for (double v : grid.coords.data())
    if (!std::isfinite(v)) throw std::domain_error("bilinear_sample: non-finite coordinate");

  int64_t n = ms[0], c = ms[1], h = ms[2], w = ms[3];
  int64_t k = gs[1], ho = gs[3], wo = gs[4];
  int64_t oplane = ho * wo;
  std::vector<double> out(static_cast<size_t>(n * k * c * oplane));
  auto mv = map.data();
  auto gv = grid.coords.data();

  auto sample_plane = [&](const double* img, double x, double y) -> double {
    // zero padding outside [0, w-1] x [0, h-1]
    int64_t x0 = static_cast<int64_t>(std::floor(x));
    int64_t y0 = static_cast<int64_t>(std::floor(y));
    double fx = x - static_cast<double>(x0);
    double fy = y - static_cast<double>(y0);
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        int64_t xi = x0 + dx, yi = y0 + dy;
        if (xi < 0 || xi >= w || yi < 0 || yi >= h) continue;
        double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
        acc += wgt * img[yi * w + xi];
      }
    return acc;
  };

  for (int64_t b = 0; b < n; ++b)
    for (int64_t kp = 0; kp < k; ++kp) {
      const double* gx = gv.data() + ((b * k + kp) * 2 + 0) * oplane;
      const double* gy = gv.data() + ((b * k + kp) * 2 + 1) * oplane;
      for (int64_t ch = 0; ch < c; ++ch) {
        const double* img = mv.data() + (b * c + ch) * h * w;
        double* dst = out.data() + ((b * (k * c) + kp * c + ch)) * oplane;
        for (int64_t i = 0; i < oplane; ++i) dst[i] = sample_plane(img, gx[i], gy[i]);
      }
    }

  auto mn = map.node();
  auto gn = grid.coords.node();
  return make_result(
      {n, k * c, ho, wo}, std::move(out), {mn, gn}, [mn, gn, n, c, h, w, k, oplane](Node& o) {
        bool need_map = mn->requires_grad;
        bool need_grid = gn->requires_grad;
        double* mg = need_map ? mn->grad_data() : nullptr;
        double* gg = need_grid ? gn->grad_data() : nullptr;
        for (int64_t b = 0; b < n; ++b)
          for (int64_t kp = 0; kp < k; ++kp) {
            const double* gx = gn->value.data() + ((b * k + kp) * 2 + 0) * oplane;
            const double* gy = gn->value.data() + ((b * k + kp) * 2 + 1) * oplane;
            double* ggx = need_grid ? gg + ((b * k + kp) * 2 + 0) * oplane : nullptr;
            double* ggy = need_grid ? gg + ((b * k + kp) * 2 + 1) * oplane : nullptr;
            for (int64_t ch = 0; ch < c; ++ch) {
              const double* img = mn->value.data() + (b * c + ch) * h * w;
              double* img_g = need_map ? mg + (b * c + ch) * h * w : nullptr;
              const double* og = o.grad.data() + (b * (k * c) + kp * c + ch) * oplane;
              for (int64_t i = 0; i < oplane; ++i) {
                double go = og[i];
                if (go == 0.0) continue;
                double x = gx[i], y = gy[i];
                int64_t x0 = static_cast<int64_t>(std::floor(x));
                int64_t y0 = static_cast<int64_t>(std::floor(y));
                double fx = x - static_cast<double>(x0);
                double fy = y - static_cast<double>(y0);
                double ddx = 0.0, ddy = 0.0;
                for (int dy = 0; dy <= 1; ++dy)
                  for (int dx = 0; dx <= 1; ++dx) {
                    int64_t xi = x0 + dx, yi = y0 + dy;
                    if (xi < 0 || xi >= w || yi < 0 || yi >= h) continue;
                    double wx = dx ? fx : 1.0 - fx;
                    double wy = dy ? fy : 1.0 - fy;
                    double pix = img[yi * w + xi];
                    if (need_map) img_g[yi * w + xi] += go * wx * wy;
                    ddx += (dx ? 1.0 : -1.0) * wy * pix;
                    ddy += (dy ? 1.0 : -1.0) * wx * pix;
                  }
                if (need_grid) {
                  ggx[i] += go * ddx;
                  ggy[i] += go * ddy;
                }
              }
            }
          }
      });
}

SamplingGrid build_sampling_grid(int64_t height, int64_t width,
                                 const std::vector<Point2D>& kernel_spec,
                                 const OffsetField& offsets) {
  const Shape& s = offsets.values.shape();
  check(s.size() == 5 && s[2] == 2, "build_sampling_grid: offsets must be rank-5");
  check(s[1] == static_cast<int64_t>(kernel_spec.size()),
        "build_sampling_grid: kernel point count mismatch (" + std::to_string(s[1]) + " vs " +
            std::to_string(kernel_spec.size()) + ")");
  check(s[3] == height && s[4] == width,
        "build_sampling_grid: offset field spatial size mismatch");

  int64_t n = s[0], k = s[1], plane = height * width;
  // base coordinate term: (j + base_x, i + base_y) per kernel point
  Tensor base = Tensor::zeros(s);
  auto bv = base.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t kp = 0; kp < k; ++kp) {
      double* bx = bv.data() + ((b * k + kp) * 2 + 0) * plane;
      double* by = bv.data() + ((b * k + kp) * 2 + 1) * plane;
      for (int64_t i = 0; i < height; ++i)
        for (int64_t j = 0; j < width; ++j) {
          bx[i * width + j] = static_cast<double>(j) + kernel_spec[kp].x;
          by[i * width + j] = static_cast<double>(i) + kernel_spec[kp].y;
        }
    }
  SamplingGrid grid;
  grid.coords = add(offsets.values, base);
  return grid;
}

}  // namespace msgnet
