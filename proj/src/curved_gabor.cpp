#include "woodfit/curved_gabor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "woodfit/parallel.hpp"

namespace woodfit {

namespace {

Vec2 in_half_plane(Vec2 v, Vec2 axis) { return dot(v, axis) < 0.0 ? -v : v; }

// Nearest-pixel direction, used only to pick a reference for aligned sampling.
Vec2 nearest_dir(const OrientationField& orient, Vec2 p) {
  return orient.dirs.clamped(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
}

void store_sample(CurvedRegion& r, const GrayImage& img, int i, int j, Vec2 pos) {
  const auto k = r.index(i, j);
  r.coords[k] = pos;
  if (img.contains(pos)) {
    r.values[k] = sample_bilinear(img, pos);
    r.valid[k] = 1;
  }
}

}  // namespace

CurvedRegion CurvedRegion::empty(Vec2 center, int p, int q) {
  CurvedRegion r;
  r.center = center;
  r.p = p;
  r.q = q;
  const std::size_t n = static_cast<std::size_t>(2 * p + 1) * (2 * q + 1);
  r.coords.assign(n, center);
  r.values.assign(n, 0.0);
  r.valid.assign(n, 0);
  return r;
}

CurvedRegion trace_curved_region(const GrayImage& img, const OrientationField& orient,
                                 Vec2 center, int p, int q, Vec2 normal_axis) {
  if (!img.contains(center)) throw std::out_of_range("trace_curved_region: center outside image");
  if (p < 0 || q < 0) throw std::invalid_argument("trace_curved_region: negative extent");

  CurvedRegion r = CurvedRegion::empty(center, p, q);
  const Vec2 t_center = orient.sample_aligned(center, nearest_dir(orient, center));
  const Vec2 n0 = in_half_plane(-perp(t_center), normal_axis);
  r.normal = n0;

  // Contour seeds and their tangents, both transported along the normal walk.
  std::vector<Vec2> seeds(2 * p + 1), tangents(2 * p + 1);
  seeds[p] = center;
  tangents[p] = perp(n0);
  for (int side : {1, -1}) {
    Vec2 pos = center;
    Vec2 n = n0 * side;
    for (int step = 1; step <= p; ++step) {
      const Vec2 t = orient.sample_aligned(pos, perp(n));
      n = -perp(t);
      pos += n;
      seeds[p + side * step] = pos;
      tangents[p + side * step] = perp(n * side);
    }
  }

  for (int i = -p; i <= p; ++i) {
    const Vec2 seed = seeds[i + p];
    store_sample(r, img, i, 0, seed);
    for (int side : {1, -1}) {
      Vec2 pos = seed;
      Vec2 t = tangents[i + p] * side;
      for (int j = 1; j <= q; ++j) {
        t = orient.sample_aligned(pos, t);
        pos += t;
        store_sample(r, img, i, side * j, pos);
      }
    }
  }
  return r;
}

std::vector<double> contour_profile(const CurvedRegion& region) {
  std::vector<double> means(region.contours(), 0.0);
  std::vector<bool> has(region.contours(), false);
  for (int i = -region.p; i <= region.p; ++i) {
    double sum = 0.0;
    int n = 0;
    for (int j = -region.q; j <= region.q; ++j) {
      if (!region.is_valid(i, j)) continue;
      sum += region.value(i, j);
      ++n;
    }
    if (n > 0) {
      means[i + region.p] = sum / n;
      has[i + region.p] = true;
    }
  }
  int best_start = 0, best_len = 0;
  for (int k = 0; k < region.contours();) {
    if (!has[k]) {
      ++k;
      continue;
    }
    int start = k;
    while (k < region.contours() && has[k]) ++k;
    if (k - start > best_len) {
      best_len = k - start;
      best_start = start;
    }
  }
  return {means.begin() + best_start, means.begin() + best_start + best_len};
}

std::optional<double> estimate_frequency(const CurvedRegion& region,
                                         const FrequencyOptions& options) {
  const auto raw = contour_profile(region);
  const int n = static_cast<int>(raw.size());
  if (n < 3) return std::nullopt;

  std::vector<double> prof(n);
  for (int k = 0; k < n; ++k) {
    const double l = raw[std::max(k - 1, 0)], c = raw[k], r = raw[std::min(k + 1, n - 1)];
    prof[k] = 0.25 * l + 0.5 * c + 0.25 * r;
  }
  const auto [lo, hi] = std::minmax_element(prof.begin(), prof.end());
  const double min_prom = std::max(options.min_prominence, options.min_relative_prominence * (*hi - *lo));

  std::vector<int> maxima;
  for (int k = 1; k + 1 < n; ++k)
    if (prof[k] > prof[k - 1] && prof[k] > prof[k + 1]) maxima.push_back(k);

  std::vector<double> peaks;
  for (std::size_t m = 0; m < maxima.size(); ++m) {
    const int k = maxima[m];
    const int left_end = m == 0 ? 0 : maxima[m - 1];
    const int right_end = m + 1 == maxima.size() ? n - 1 : maxima[m + 1];
    const double left_min = *std::min_element(prof.begin() + left_end, prof.begin() + k);
    const double right_min = *std::min_element(prof.begin() + k + 1, prof.begin() + right_end + 1);
    if (prof[k] - std::max(left_min, right_min) < min_prom) continue;
    const double a = prof[k - 1], b = prof[k], c = prof[k + 1];
    const double denom = a - 2.0 * b + c;
    const double offset = denom < 0.0 ? 0.5 * (a - c) / denom : 0.0;
    peaks.push_back(k + offset);
  }
  if (peaks.size() < 2) return std::nullopt;
  const double span = peaks.back() - peaks.front();
  if (span <= 0.0) return std::nullopt;
  const double f = (static_cast<double>(peaks.size()) - 1.0) / span;
  if (f < options.f_min || f > options.f_max) return std::nullopt;
  return f;
}

double local_curvature(const OrientationField& orient, const CurvedRegion& region) {
  auto angle_between = [](Vec2 a, Vec2 b) {
    return std::acos(std::clamp(std::abs(dot(a, b)), 0.0, 1.0));
  };
  double sum = 0.0;
  int count = 0;
  for (int i = -region.p; i <= region.p; ++i) {
    const Vec2 mid = region.coord(i, 0);
    const Vec2 d_mid = orient.sample_aligned(mid, nearest_dir(orient, mid));
    for (int side : {1, -1}) {
      int j = region.q;
      while (j > 0 && !region.is_valid(i, side * j)) --j;
      if (j == 0) continue;
      const Vec2 end = region.coord(i, side * j);
      const Vec2 d_end = orient.sample_aligned(end, nearest_dir(orient, end));
      sum += angle_between(d_mid, d_end);
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

std::complex<double> gabor_value(const GaborParams& params, double x, double y) {
  if (!(params.frequency > 0.0) || !(params.sigma_x > 0.0) || !(params.sigma_y > 0.0))
    throw std::invalid_argument("gabor: frequency and sigmas must be positive");
  const double c = std::cos(params.theta), s = std::sin(params.theta);
  const double xt = x * c + y * s;
  const double yt = -x * s + y * c;
  const double envelope = std::exp(-0.5 * (xt * xt / (params.sigma_x * params.sigma_x) +
                                           yt * yt / (params.sigma_y * params.sigma_y)));
  const double arg = kTwoPi * params.frequency * xt;
  return {envelope * std::cos(arg), envelope * std::sin(arg)};
}

GaborKernel gabor_kernel(const GaborParams& params) {
  if (params.half_size < 0) throw std::invalid_argument("gabor: negative half size");
  GaborKernel k;
  k.half_size = params.half_size;
  const int side = 2 * params.half_size + 1;
  k.taps.resize(static_cast<std::size_t>(side) * side);
  for (int y = -params.half_size; y <= params.half_size; ++y)
    for (int x = -params.half_size; x <= params.half_size; ++x)
      k.taps[static_cast<std::size_t>(y + params.half_size) * side + (x + params.half_size)] =
          gabor_value(params, x, y);
  return k;
}

GaborParams gabor_params_for(double frequency, double sx_periods, double sy_periods) {
  if (!(frequency > 0.0)) throw std::invalid_argument("gabor: frequency must be positive");
  GaborParams g;
  g.frequency = frequency;
  g.sigma_x = sx_periods / frequency;
  g.sigma_y = sy_periods / frequency;
  g.half_size = static_cast<int>(std::ceil(3.0 * std::max(g.sigma_x, g.sigma_y)));
  return g;
}

std::vector<std::complex<double>> filter_patch(const CurvedRegion& region,
                                               const GaborParams& params, int radius) {
  if (params.theta != 0.0) throw std::invalid_argument("filter_patch: patch frame needs theta = 0");
  const int p = region.p, q = region.q, h = params.half_size;
  const int side = 2 * radius + 1;
  std::vector<std::complex<double>> out(static_cast<std::size_t>(side) * side);

  double mean = 0.0;
  int n_valid = 0;
  for (std::size_t k = 0; k < region.values.size(); ++k) {
    if (!region.valid[k]) continue;
    mean += region.values[k];
    ++n_valid;
  }
  if (n_valid == 0) return out;
  mean /= n_valid;

  // Separable at theta = 0: Gaussian along the contour, complex carrier across.
  std::vector<double> gy(2 * h + 1);
  std::vector<std::complex<double>> gx(2 * h + 1);
  for (int t = -h; t <= h; ++t) {
    gy[t + h] = std::exp(-0.5 * t * t / (params.sigma_y * params.sigma_y));
    gx[t + h] = gabor_value({0.0, params.frequency, params.sigma_x, params.sigma_y, h}, t, 0.0);
  }

  const int i_lo = std::max(-p, -radius - h), i_hi = std::min(p, radius + h);
  std::vector<double> along(static_cast<std::size_t>(i_hi - i_lo + 1) * side, 0.0);
  for (int i = i_lo; i <= i_hi; ++i) {
    for (int j0 = -radius; j0 <= radius; ++j0) {
      double acc = 0.0;
      const int b_lo = std::max(-h, j0 - q), b_hi = std::min(h, j0 + q);
      for (int b = b_lo; b <= b_hi; ++b) {
        const auto k = region.index(i, j0 - b);
        if (region.valid[k]) acc += (region.values[k] - mean) * gy[b + h];
      }
      along[static_cast<std::size_t>(i - i_lo) * side + (j0 + radius)] = acc;
    }
  }
  for (int i0 = -radius; i0 <= radius; ++i0) {
    const int a_lo = std::max(-h, i0 - i_hi), a_hi = std::min(h, i0 - i_lo);
    for (int j0 = -radius; j0 <= radius; ++j0) {
      std::complex<double> acc = 0.0;
      for (int a = a_lo; a <= a_hi; ++a)
        acc += along[static_cast<std::size_t>(i0 - a - i_lo) * side + (j0 + radius)] * gx[a + h];
      out[static_cast<std::size_t>(i0 + radius) * side + (j0 + radius)] = acc;
    }
  }
  return out;
}

namespace {

std::vector<Vec2> stride_grid(int width, int height, int stride) {
  std::vector<Vec2> out;
  const int off = stride / 2;
  for (int y = off; y < height; y += stride)
    for (int x = off; x < width; x += stride) out.push_back({double(x), double(y)});
  return out;
}

double median_of(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

RegionAnalysis analyze_regions(const GrayImage& img, const OrientationField& orient,
                               const GaborConfig& config) {
  const int w = img.width(), h = img.height();
  const int stride = std::max(1, config.frequency_stride);
  const Vec2 axis = config.normal_axis.value_or(dominant_normal_axis(orient));
  const int gw = (w - stride / 2 + stride - 1) / stride;
  const int gh = (h - stride / 2 + stride - 1) / stride;
  const auto seeds = stride_grid(w, h, stride);

  std::vector<double> freq(seeds.size(), 0.0), curv(seeds.size(), 0.0);
  std::vector<std::uint8_t> ok(seeds.size(), 0);
  parallel_for(seeds.size(), [&](std::size_t s) {
    const auto region = trace_curved_region(img, orient, seeds[s], config.p, config.q, axis);
    if (const auto f = estimate_frequency(region, config.frequency)) {
      freq[s] = *f;
      ok[s] = 1;
    }
    curv[s] = local_curvature(orient, region);
  });

  // 3x3 median over valid grid cells suppresses isolated peak-count errors.
  std::vector<double> freq_clean(seeds.size(), 0.0);
  std::vector<std::uint8_t> ok_clean(seeds.size(), 0);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const std::size_t s = static_cast<std::size_t>(gy) * gw + gx;
      if (!ok[s]) continue;
      std::vector<double> window;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = gx + dx, y = gy + dy;
          if (x < 0 || y < 0 || x >= gw || y >= gh) continue;
          const std::size_t t = static_cast<std::size_t>(y) * gw + x;
          if (ok[t]) window.push_back(freq[t]);
        }
      freq_clean[s] = median_of(window);
      ok_clean[s] = 1;
    }
  }

  RegionAnalysis out{{ScalarField(w, h), Mask(w, h)}, ScalarField(w, h), Mask(w, h)};
  const int off = stride / 2;
  // Frequency is interpolated between valid cell centres: a kernel frequency
  // that jumps between neighbouring patches leaves steps in the phase.
  auto interpolate = [&](int x, int y) {
    const double fx = std::clamp((x - off) / static_cast<double>(stride), 0.0, gw - 1.0);
    const double fy = std::clamp((y - off) / static_cast<double>(stride), 0.0, gh - 1.0);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double tx = fx - x0, ty = fy - y0;
    double sum = 0.0, wsum = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const int cx = std::min(x0 + dx, gw - 1), cy = std::min(y0 + dy, gh - 1);
        const double wgt = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty);
        const std::size_t t = static_cast<std::size_t>(cy) * gw + cx;
        if (wgt <= 0.0 || !ok_clean[t]) continue;
        sum += wgt * freq_clean[t];
        wsum += wgt;
      }
    return sum / wsum;
  };
  for (int y = 0; y < h; ++y) {
    const int gy = std::clamp((y - off + stride / 2 + (stride % 2)) / stride, 0, gh - 1);
    for (int x = 0; x < w; ++x) {
      const int gx = std::clamp((x - off + stride / 2 + (stride % 2)) / stride, 0, gw - 1);
      const std::size_t s = static_cast<std::size_t>(gy) * gw + gx;
      out.frequency.valid(x, y) = ok_clean[s];
      if (ok_clean[s]) out.frequency.frequency(x, y) = interpolate(x, y);
      out.curvature(x, y) = curv[s];
      out.anomaly(x, y) = curv[s] > config.curvature_threshold ? 1 : 0;
    }
  }
  return out;
}

ComplexResponse filter_image(const GrayImage& img, const OrientationField& orient,
                             const FrequencyMap& freq, const GaborConfig& config) {
  const int w = img.width(), h = img.height();
  const Vec2 axis = config.normal_axis.value_or(dominant_normal_axis(orient));
  const int radius = std::max(0, config.splat_radius);
  const int side = 2 * radius + 1;

  std::vector<Vec2> seeds;
  for (const Vec2& s : stride_grid(w, h, std::max(1, config.stride)))
    if (freq.valid(int(s.x), int(s.y))) seeds.push_back(s);

  struct Splat {
    std::size_t pixel;
    std::complex<double> value;
    double weight;
  };
  // Tent window over the splat footprint; neighbouring patches blend instead
  // of switching, which would leave steps where their biases differ.
  auto tent = [radius](int k) { return 1.0 - std::abs(k) / (radius + 1.0); };
  std::vector<std::vector<Splat>> splats(seeds.size());
  std::vector<double> seed_weight(seeds.size(), 1.0);

  parallel_for(seeds.size(), [&](std::size_t s) {
    const Vec2 c = seeds[s];
    const double f = freq.frequency(int(c.x), int(c.y));
    const auto params = gabor_params_for(f, config.sigma_x_periods, config.sigma_y_periods);
    const int reach = radius + params.half_size;
    const auto region = trace_curved_region(img, orient, c, std::min(config.p, reach),
                                            std::min(config.q, reach), axis);
    const auto out = filter_patch(region, params, radius);
    auto& list = splats[s];
    list.reserve(out.size());
    for (int i = -radius; i <= radius; ++i) {
      if (std::abs(i) > region.p) continue;
      for (int j = -radius; j <= radius; ++j) {
        if (std::abs(j) > region.q) continue;
        const Vec2 pos = region.coord(i, j);
        const int px = static_cast<int>(std::lround(pos.x));
        const int py = static_cast<int>(std::lround(pos.y));
        if (!img.contains(px, py)) continue;
        list.push_back({img.index(px, py),
                        out[static_cast<std::size_t>(i + radius) * side + (j + radius)],
                        tent(i) * tent(j)});
      }
    }
    if (config.weighting == AccumulationWeight::coherence)
      seed_weight[s] = orient.coherence(int(c.x), int(c.y));
  });

  ComplexResponse resp{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h)};
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const double wgt = seed_weight[s];
    if (wgt <= 0.0) continue;
    for (const Splat& sp : splats[s]) {
      const double ws = wgt * sp.weight;
      resp.re.data()[sp.pixel] += ws * sp.value.real();
      resp.im.data()[sp.pixel] += ws * sp.value.imag();
      resp.weight.data()[sp.pixel] += ws;
    }
  }
  for (std::size_t i = 0; i < resp.re.size(); ++i) {
    const double wgt = resp.weight.data()[i];
    if (wgt > 0.0) {
      resp.re.data()[i] /= wgt;
      resp.im.data()[i] /= wgt;
    }
  }
  return resp;
}

PhaseMagnitude phase_magnitude(const ComplexResponse& resp) {
  const int w = resp.width(), h = resp.height();
  PhaseMagnitude pm{{ScalarField(w, h), Mask(w, h)}, ScalarField(w, h)};
  for (std::size_t i = 0; i < resp.re.size(); ++i) {
    if (!(resp.weight.data()[i] > 0.0)) continue;
    const double re = resp.re.data()[i], im = resp.im.data()[i];
    double phi = std::atan2(im, re);
    if (phi <= -kPi) phi = kPi;
    pm.phase.phase.data()[i] = phi;
    pm.phase.valid.data()[i] = 1;
    pm.magnitude.data()[i] = std::hypot(re, im);
  }
  return pm;
}

OrientationField refined_orientation(const PhaseImage& phase, int window_w, int window_h) {
  const int w = phase.width(), h = phase.height();
  ScalarField c(w, h), s(w, h);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!phase.valid.data()[i]) continue;
    c.data()[i] = std::cos(phase.phase.data()[i]);
    s.data()[i] = std::sin(phase.phase.data()[i]);
  }
  const Gradient gc = scharr_gradient(c);
  const Gradient gs = scharr_gradient(s);
  Gradient g{ScalarField(w, h), ScalarField(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool neighbourhood_valid = true;
      for (int dy = -1; dy <= 1 && neighbourhood_valid; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (!phase.valid.clamped(x + dx, y + dy)) {
            neighbourhood_valid = false;
            break;
          }
      if (!neighbourhood_valid) continue;
      const double cv = c(x, y), sv = s(x, y);
      g.gx(x, y) = cv * gs.gx(x, y) - sv * gc.gx(x, y);
      g.gy(x, y) = cv * gs.gy(x, y) - sv * gc.gy(x, y);
    }
  }
  return orientation_field(g, window_w, window_h);
}

}  // namespace woodfit
