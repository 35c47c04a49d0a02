#include "woodfit/board_locator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "woodfit/parallel.hpp"

namespace woodfit {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> gaps_of(const std::vector<double>& positions) {
  std::vector<double> g;
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) g.push_back(positions[i + 1] - positions[i]);
  return g;
}

struct LsFit {
  double s2 = 0.0, x2 = 0.0, residual = std::numeric_limits<double>::infinity();
};

// Least squares fit of y_j^2 = s^2 (k0 + j)^2 - x^2 over both sides.
LsFit fit_ring_model(const std::vector<std::vector<double>>& sides, int k0) {
  double saa = 0, sab = 0, sbb = 0, sya = 0, syb = 0;
  for (const auto& ys : sides)
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double a = std::pow(k0 + static_cast<double>(j), 2), b = -1.0, y2 = ys[j] * ys[j];
      saa += a * a;
      sab += a * b;
      sbb += b * b;
      sya += y2 * a;
      syb += y2 * b;
    }
  const double det = saa * sbb - sab * sab;
  LsFit fit;
  if (std::abs(det) < 1e-12) return fit;
  fit.s2 = (sya * sbb - syb * sab) / det;
  fit.x2 = (saa * syb - sab * sya) / det;
  if (!(fit.s2 > 0.0) || fit.x2 < -0.25 * fit.s2) return LsFit{};
  fit.x2 = std::max(fit.x2, 0.0);
  double res = 0.0;
  for (const auto& ys : sides)
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double e = ys[j] * ys[j] - fit.s2 * std::pow(k0 + static_cast<double>(j), 2) + fit.x2;
      res += e * e;
    }
  fit.residual = res;
  return fit;
}

double ring_coord_plain(double u, double v_unused, const BoardPose& p) {
  (void)v_unused;
  const double y = (u - p.u_center) / p.scale;
  return std::sqrt(p.x_offset * p.x_offset + y * y) / p.s_r;
}

}  // namespace

std::vector<double> ring_scanline_positions(const RingSet& rings, double v) {
  std::vector<double> out;
  for (const auto& ring : rings.rings) {
    std::vector<double> xs;
    const auto& pts = ring.points;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double a = pts[i].y - v, b = pts[i + 1].y - v;
      if (a == 0.0) xs.push_back(pts[i].x);
      else if ((a < 0.0) != (b < 0.0) && b != 0.0)
        xs.push_back(pts[i].x + a / (a - b) * (pts[i + 1].x - pts[i].x));
    }
    if (!pts.empty() && pts.back().y == v) xs.push_back(pts.back().x);
    std::sort(xs.begin(), xs.end());
    // A noisy trace may wiggle across the row several times at one place.
    for (std::size_t i = 0; i < xs.size();) {
      std::size_t j = i;
      double sum = 0.0;
      while (j < xs.size() && xs[j] - xs[i] < 2.0) sum += xs[j++];
      out.push_back(sum / static_cast<double>(j - i));
      i = j;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() < 3)
    throw InsufficientDataError("only " + std::to_string(out.size()) +
                                " ring crossings on the scanline (need 3)");
  return out;
}

CenterEstimate find_center_projection(const std::vector<double>& positions) {
  if (positions.size() < 4) throw InsufficientDataError("center estimate needs >= 4 positions");
  const auto g = gaps_of(positions);
  const std::size_t m = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
  CenterEstimate c;
  c.gap_index = m;
  c.u_center = 0.5 * (positions[m] + positions[m + 1]);
  std::size_t good = 0, pairs = 0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    ++pairs;
    if (i + 1 <= m ? g[i] < g[i + 1] : g[i + 1] < g[i]) ++good;
  }
  c.score = pairs ? static_cast<double>(good) / pairs : 1.0;
  if (m == 0 || m + 1 == g.size() || c.score < 0.7) {
    c.outside = true;
    // Gaps widen toward the axis: the side with the larger end gap faces it.
    c.side = g.back() > g.front() ? CenterSide::right : CenterSide::left;
  }
  return c;
}

double estimate_scale(const std::vector<double>& positions, const CenterEstimate* center) {
  if (positions.size() < 3) throw InsufficientDataError("scale estimate needs >= 3 positions");
  const auto g = gaps_of(positions);
  if (!center || center->outside) return median_of(g);
  std::vector<double> kept;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto d = static_cast<long>(i) - static_cast<long>(center->gap_index);
    if (std::abs(d) > 1) kept.push_back(g[i]);
  }
  return median_of(kept.empty() ? g : kept);
}

double pose_loss(const RingSet& rings, const BoardPose& pose) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ring : rings.rings)
    for (const Vec2& p : ring.points) {
      const double u = ring_coord_plain(p.x, p.y, pose);
      const double d = u - std::round(u);
      sum += d * d;
      ++n;
    }
  if (n == 0) throw InsufficientDataError("pose loss: empty ring set");
  return sum / static_cast<double>(n);
}

BoardPose initial_pose(const RingSet& rings, int width, int height) {
  (void)width;
  std::vector<double> centers;
  std::optional<CenterEstimate> mid_estimate;
  std::vector<double> mid_positions;
  for (double frac : {0.5, 0.25, 0.375, 0.625, 0.75}) {
    const double row = std::floor(frac * height);
    std::vector<double> pos;
    try {
      pos = ring_scanline_positions(rings, row);
    } catch (const InsufficientDataError&) {
      continue;
    }
    if (pos.size() < 4) continue;
    const auto c = find_center_projection(pos);
    if (!mid_estimate || pos.size() > mid_positions.size()) {
      mid_estimate = c;
      mid_positions = pos;
    }
    if (!c.outside) centers.push_back(c.u_center);
  }
  if (!mid_estimate) throw InsufficientDataError("fewer than 4 ring crossings on every scanline");

  BoardPose pose;
  pose.scale = 1.0;
  pose.center_outside_image = centers.empty();
  pose.u_center = centers.empty() ? mid_estimate->u_center : median_of(centers);

  std::vector<std::vector<double>> sides(2);
  for (double u : mid_positions) {
    if (u < pose.u_center) sides[0].push_back(pose.u_center - u);
    else sides[1].push_back(u - pose.u_center);
  }
  for (auto& s : sides) std::sort(s.begin(), s.end());

  const double s_guess = estimate_scale(mid_positions, &*mid_estimate);
  LsFit best;
  int best_k = 0;
  const int k_max = std::max(4, static_cast<int>(std::ceil(4.0 * width / std::max(s_guess, 1.0))));
  for (int k0 = 1; k0 <= k_max; ++k0) {
    const LsFit f = fit_ring_model(sides, k0);
    if (f.residual < best.residual) {
      best = f;
      best_k = k0;
    }
  }
  if (best_k == 0) {
    pose.s_r = s_guess;
    pose.x_offset = 0.0;
  } else {
    pose.s_r = std::sqrt(best.s2);
    pose.x_offset = std::sqrt(best.x2);
  }
  pose.z_origin = 0.0;
  pose.sign_ambiguous = pose.x_offset > 0.0;
  return pose;
}

BoardPose brute_force_pose(const RingSet& rings, const BoardPose& init, const PoseGrid& grid) {
  if (rings.rings.empty()) throw InsufficientDataError("pose search: empty ring set");
  const double s = init.s_r;

  struct Candidate {
    double u, x, scale;
  };
  auto search = [&](const std::vector<Candidate>& cands) {
    std::vector<double> loss(cands.size());
    parallel_for(cands.size(), [&](std::size_t i) {
      BoardPose p = init;
      p.u_center = cands[i].u;
      p.x_offset = cands[i].x;
      p.scale = cands[i].scale;
      loss[i] = pose_loss(rings, p);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i)
      if (loss[i] < loss[best]) best = i;
    return cands[best];
  };
  auto axis = [](double lo, double hi, double step) {
    std::vector<double> v;
    const long n = std::lround((hi - lo) / step);
    for (long i = 0; i <= n; ++i) v.push_back(lo + i * step);
    return v;
  };

  // Candidates are enumerated in (x_offset, scale) order; the strict '<'
  // above keeps the lexicographically first minimum. z_origin does not enter
  // the loss without distortion, so its grid collapses to 0.
  const double x_step = grid.x_step_rings * s;
  std::vector<Candidate> coarse;
  for (double x : axis(init.x_offset - grid.x_half_rings * s, init.x_offset + grid.x_half_rings * s,
                       x_step)) {
    if (x < 0.0) continue;
    for (double k : axis(-grid.scale_half, grid.scale_half, grid.scale_step))
      coarse.push_back({init.u_center, x, init.scale * (1.0 + k)});
  }
  Candidate best = search(coarse);

  if (grid.refine) {
    std::vector<Candidate> fine;
    const double sc_step = grid.scale_step * init.scale;
    for (double u : axis(best.u - grid.u_half, best.u + grid.u_half, grid.u_step))
      for (double x : axis(best.x - x_step, best.x + x_step, x_step / 10.0)) {
        if (x < 0.0) continue;
        for (double sc : axis(best.scale - sc_step, best.scale + sc_step, sc_step / 10.0))
          fine.push_back({u, x, sc});
      }
    best = search(fine);
  }

  BoardPose out = init;
  out.u_center = best.u;
  out.x_offset = best.x;
  out.scale = best.scale;
  out.z_origin = 0.0;
  out.sign_ambiguous = out.x_offset > 0.0;
  return out;
}

BoardPose locate_board(const RingSet& rings, int width, int height, const PoseGrid& grid) {
  const BoardPose init = initial_pose(rings, width, height);
  return brute_force_pose(rings, init, grid).in_pixel_units();
}

}  // namespace woodfit
