#include "woodfit/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "woodfit/parallel.hpp"

namespace woodfit {

namespace {

// Applies a symmetric odd-length kernel along rows (horizontal=true) or columns.
ScalarField convolve_axis(const ScalarField& img, const std::vector<double>& kernel,
                          bool horizontal) {
  const int half = static_cast<int>(kernel.size() / 2);
  ScalarField out(img.width(), img.height());
  parallel_for(static_cast<std::size_t>(img.height()), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const double v = horizontal ? img.clamped(x + k, y) : img.clamped(x, y + k);
        acc += kernel[k + half] * v;
      }
      out(x, y) = acc;
    }
  });
  return out;
}

Vec2 canonical_axis(Vec2 v) {
  if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) return -v;
  return v;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * half + 1);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + half];
  }
  for (double& v : k) v /= sum;
  return k;
}

GrayImage gaussian_smooth(const GrayImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto kernel = gaussian_kernel(sigma);
  return convolve_axis(convolve_axis(img, kernel, true), kernel, false);
}

std::vector<double> gaussian_smooth_1d(const std::vector<double>& values, double sigma) {
  if (sigma <= 0.0 || values.empty()) return values;
  const auto kernel = gaussian_kernel(sigma);
  const int half = static_cast<int>(kernel.size() / 2);
  const int n = static_cast<int>(values.size());
  std::vector<double> out(values.size());
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = -half; k <= half; ++k) acc += kernel[k + half] * values[std::clamp(i + k, 0, n - 1)];
    out[i] = acc;
  }
  return out;
}

Gradient scharr_gradient(const ScalarField& img) {
  if (img.width() < 3 || img.height() < 3)
    throw DimensionError("scharr_gradient: image must be at least 3x3");
  Gradient g{ScalarField(img.width(), img.height()), ScalarField(img.width(), img.height())};
  constexpr double s0 = 3.0 / 16.0, s1 = 10.0 / 16.0;
  parallel_for(static_cast<std::size_t>(img.height()), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < img.width(); ++x) {
      auto at = [&](int dx, int dy) { return img.clamped(x + dx, y + dy); };
      const double dx_up = 0.5 * (at(1, -1) - at(-1, -1));
      const double dx_mid = 0.5 * (at(1, 0) - at(-1, 0));
      const double dx_dn = 0.5 * (at(1, 1) - at(-1, 1));
      const double dy_l = 0.5 * (at(-1, 1) - at(-1, -1));
      const double dy_m = 0.5 * (at(0, 1) - at(0, -1));
      const double dy_r = 0.5 * (at(1, 1) - at(1, -1));
      g.gx(x, y) = s0 * dx_up + s1 * dx_mid + s0 * dx_dn;
      g.gy(x, y) = s0 * dy_l + s1 * dy_m + s0 * dy_r;
    }
  });
  return g;
}

ScalarField box_mean(const ScalarField& field, int window_w, int window_h) {
  if (window_w < 1 || window_h < 1 || window_w % 2 == 0 || window_h % 2 == 0)
    throw DimensionError("box window dimensions must be odd and >= 1");
  const auto kw = std::vector<double>(window_w, 1.0 / window_w);
  const auto kh = std::vector<double>(window_h, 1.0 / window_h);
  return convolve_axis(convolve_axis(field, kw, true), kh, false);
}

OrientationField orientation_field(const Gradient& grad, int window_w, int window_h) {
  const int w = grad.gx.width(), h = grad.gx.height();
  ScalarField c2(w, h), s2(w, h), mag(w, h);
  for (std::size_t i = 0; i < c2.size(); ++i) {
    const double gx = grad.gx.data()[i], gy = grad.gy.data()[i];
    c2.data()[i] = gx * gx - gy * gy;
    s2.data()[i] = 2.0 * gx * gy;
    mag.data()[i] = gx * gx + gy * gy;
  }
  c2 = box_mean(c2, window_w, window_h);
  s2 = box_mean(s2, window_w, window_h);
  mag = box_mean(mag, window_w, window_h);

  OrientationField out{Raster<Vec2>(w, h, Vec2{1.0, 0.0}), ScalarField(w, h, 0.0)};
  for (std::size_t i = 0; i < c2.size(); ++i) {
    const double m = mag.data()[i];
    const double len = std::hypot(c2.data()[i], s2.data()[i]);
    // Tiny relative magnitudes are rounding residue of a flat window.
    if (m <= 1e-300 || len <= 1e-12 * m) continue;
    const double gradient_angle = 0.5 * std::atan2(s2.data()[i], c2.data()[i]);
    const double tangent_angle = gradient_angle + 0.5 * M_PI;
    out.dirs.data()[i] = {std::cos(tangent_angle), std::sin(tangent_angle)};
    out.coherence.data()[i] = std::min(1.0, len / m);
  }
  return out;
}

Vec2 OrientationField::sample_aligned(Vec2 p, Vec2 reference) const {
  const double x = std::clamp(p.x, 0.0, width() - 1.0);
  const double y = std::clamp(p.y, 0.0, height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  Vec2 acc;
  const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (weights[k] == 0.0) continue;
    const double c = coherence.clamped(xs[k], ys[k]);
    if (c <= 0.0) continue;
    Vec2 d = dirs.clamped(xs[k], ys[k]);
    if (dot(d, reference) < 0.0) d = -d;
    acc += d * (weights[k] * c);
  }
  const double n = norm(acc);
  if (n < 1e-12) return reference;
  return acc * (1.0 / n);
}

Vec2 dominant_normal_axis(const OrientationField& field) {
  double c2 = 0.0, s2 = 0.0, total = 0.0;
  for (std::size_t i = 0; i < field.dirs.size(); ++i) {
    const double w = field.coherence.data()[i];
    if (w <= 0.0) continue;
    const Vec2 n = perp(field.dirs.data()[i]);
    c2 += w * (n.x * n.x - n.y * n.y);
    s2 += w * 2.0 * n.x * n.y;
    total += w;
  }
  if (total <= 0.0 || std::hypot(c2, s2) < 0.05 * total) return {1.0, 0.0};
  const double a = 0.5 * std::atan2(s2, c2);
  return canonical_axis({std::cos(a), std::sin(a)});
}

}  // namespace woodfit
