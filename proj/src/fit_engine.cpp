#include "woodfit/fit_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "woodfit/autodiff.hpp"
#include "woodfit/image_ops.hpp"
#include "woodfit/parallel.hpp"
#include "woodfit/text_io.hpp"

namespace woodfit {

namespace {

constexpr double kUnsupported = std::numeric_limits<double>::infinity();

// Texels with dist == kUnsupported take the value of the nearest supported
// texel (two-pass chamfer in radial units), fading linearly to 0 over
// `radius`. The fade slope stays below |m| / radius, far from a fold-over,
// where a hard drop to 0 would be one. `grid` and `dist` are cols x rows.
void fill_from_support(ScalarField& grid, ScalarField& dist, double cr, double cz, double radius) {
  const int rows = grid.height(), cols = grid.width();
  const double cd = std::hypot(cr, cz);
  const ScalarField supported = dist;
  auto relax = [&](int i, int j, int ni, int nj, double cost) {
    if (ni < 0 || nj < 0 || ni >= rows || nj >= cols) return;
    if (dist(nj, ni) + cost < dist(j, i)) {
      dist(j, i) = dist(nj, ni) + cost;
      grid(j, i) = grid(nj, ni);
    }
  };
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      relax(i, j, i - 1, j - 1, cd);
      relax(i, j, i - 1, j, cr);
      relax(i, j, i - 1, j + 1, cd);
      relax(i, j, i, j - 1, cz);
    }
  for (int i = rows - 1; i >= 0; --i)
    for (int j = cols - 1; j >= 0; --j) {
      relax(i, j, i + 1, j + 1, cd);
      relax(i, j, i + 1, j, cr);
      relax(i, j, i + 1, j - 1, cd);
      relax(i, j, i, j + 1, cz);
    }
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (supported.data()[k] > 0.0)
      grid.data()[k] *= std::max(0.0, 1.0 - dist.data()[k] / radius);
}

}  // namespace

void validate(const FitConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (c.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) throw std::invalid_argument("adam_beta1 must lie in [0, 1)");
  if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must lie in [0, 1)");
  if (!(c.adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be > 0");
  if (!(c.loss_mask_mag_min >= 0.0)) throw std::invalid_argument("loss_mask_mag_min must be >= 0");
  if (c.texture_rows < 2 || c.texture_cols < 2) throw std::invalid_argument("texture needs >= 2x2 texels");
  if (!(c.idw_radius_rings > 0.0)) throw std::invalid_argument("idw_radius_rings must be > 0");
  if (!(c.idw_smooth_texels >= 0.0)) throw std::invalid_argument("idw_smooth_texels must be >= 0");
  if (c.kappa_range < 0) throw std::invalid_argument("kappa_range must be >= 0");
  if (!(c.axis_exclusion_rings >= 0.0)) throw std::invalid_argument("axis_exclusion_rings must be >= 0");
  if (!(c.step_smooth_texels >= 0.0)) throw std::invalid_argument("step_smooth_texels must be >= 0");
  if (!(c.cut_margin >= 0.0 && c.cut_margin < kPi)) throw std::invalid_argument("cut_margin must lie in [0, pi)");
}

double phase_loss(const PhaseImage& reference, const PhaseImage& render, const Mask& mask) {
  if (!reference.phase.same_shape(render.phase) || !reference.phase.same_shape(mask))
    throw DimensionError("phase_loss: dimension mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.data()[i]) continue;
    const double d = wrapped_diff(reference.phase.data()[i], render.phase.data()[i]);
    sum += d * d;
    ++n;
  }
  if (n == 0) throw InsufficientDataError("phase_loss: empty mask");
  return sum / static_cast<double>(n);
}

ResolvedPhase resolve_phase_sign(const PhaseImage& phase, const BoardPose& pose) {
  ResolvedPhase out{phase, false, false};
  const double uc = pose.u_center;
  out.center_outside_image = pose.center_outside_image || uc < 0.0 || uc > phase.width() - 1.0;
  for (int y = 0; y < phase.height(); ++y)
    for (int x = 0; x < phase.width() && x < uc; ++x) {
      out.phase.phase(x, y) = wrap_angle(-phase.phase(x, y));
      out.flipped = true;
    }
  return out;
}

Mask loss_mask(const PhaseImage& phase, const MagnitudeImage& magnitude, double fraction) {
  const double threshold = magnitude_threshold(phase, magnitude, fraction);
  Mask mask(phase.width(), phase.height());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = phase.valid.data()[i] && magnitude.data()[i] >= threshold ? 1 : 0;
  return mask;
}

void exclude_axis_band(Mask& mask, const BoardPose& pose, double rings) {
  if (rings <= 0.0) return;
  const double u0 = pose.x_offset / pose.s_r;
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u) {
      const double y = (u - pose.u_center) / pose.scale;
      if (std::hypot(pose.x_offset, y) / pose.s_r - u0 < rings) mask(u, v) = 0;
    }
}

DistortionTexture initial_distortion(const RingSet& rings, const BoardPose& pose,
                                     const DistortionTexture& shape, const FitConfig& config) {
  if (rings.rings.size() < 2) throw InsufficientDataError("initial distortion needs >= 2 rings");
  const double s = pose.s_r;

  struct RingSamples {
    std::vector<TreePoint> q;
    long k = 0;
  };
  std::vector<RingSamples> per_ring;
  for (const auto& ring : rings.rings) {
    if (ring.points.empty()) continue;
    RingSamples rs;
    std::vector<double> u;
    for (const Vec2& p : ring.points) {
      rs.q.push_back(tree_point(pose, p.x, p.y));
      u.push_back(rs.q.back().r / s);
    }
    std::nth_element(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(u.size() / 2), u.end());
    rs.k = std::lround(u[u.size() / 2]);
    per_ring.push_back(std::move(rs));
  }
  bool distinct = false;
  for (const auto& rs : per_ring) distinct |= rs.k != per_ring.front().k;
  if (!distinct) throw InsufficientDataError("initial distortion: all rings map to one ring index");

  long best_kappa = 0;
  double best_res = std::numeric_limits<double>::infinity();
  for (long kappa = -config.kappa_range; kappa <= config.kappa_range; ++kappa) {
    double res = 0.0;
    for (const auto& rs : per_ring)
      for (const TreePoint& q : rs.q) res += std::pow((rs.k + kappa) * s - q.r, 2);
    if (res < best_res) {
      best_res = res;
      best_kappa = kappa;
    }
  }

  struct Sample {
    double r, z, m;
  };
  std::vector<Sample> samples;
  for (const auto& rs : per_ring)
    for (const TreePoint& q : rs.q) samples.push_back({q.r, q.z, (rs.k + best_kappa) * s - q.r});

  const double radius = config.idw_radius_rings * s;
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  auto cell = [&](double v) { return static_cast<long long>(std::floor(v / radius)); };
  auto key = [](long long a, long long b) { return (a << 32) ^ (b & 0xffffffffLL); };
  for (std::size_t i = 0; i < samples.size(); ++i)
    buckets[key(cell(samples[i].r), cell(samples[i].z))].push_back(i);

  DistortionTexture tex = shape;
  ScalarField grid(tex.cols, tex.rows), dist(tex.cols, tex.rows);
  parallel_for(static_cast<std::size_t>(tex.rows), [&](std::size_t row) {
    const int i = static_cast<int>(row);
    const double r = i * tex.r_step();
    for (int j = 0; j < tex.cols; ++j) {
      const double z = j * tex.z_step();
      double wsum = 0.0, msum = 0.0;
      bool exact = false;
      for (long long dr = -1; dr <= 1 && !exact; ++dr)
        for (long long dz = -1; dz <= 1 && !exact; ++dz) {
          const auto it = buckets.find(key(cell(r) + dr, cell(z) + dz));
          if (it == buckets.end()) continue;
          for (std::size_t idx : it->second) {
            const Sample& sm = samples[idx];
            const double d2 = (sm.r - r) * (sm.r - r) + (sm.z - z) * (sm.z - z);
            if (d2 >= radius * radius) continue;
            if (d2 < 1e-18) {
              msum = sm.m;
              wsum = 1.0;
              exact = true;
              break;
            }
            wsum += 1.0 / d2;
            msum += sm.m / d2;
          }
        }
      grid(j, i) = wsum > 0.0 ? msum / wsum : 0.0;
      dist(j, i) = wsum > 0.0 ? 0.0 : kUnsupported;
    }
  });

  fill_from_support(grid, dist, tex.r_step(), tex.z_step(), radius);
  const ScalarField smooth = gaussian_smooth(grid, config.idw_smooth_texels);
  for (int i = 0; i < tex.rows; ++i)
    for (int j = 0; j < tex.cols; ++j) tex.at(i, j) = smooth(j, i);
  return tex;
}

PhaseObjective::PhaseObjective(const PhaseImage& reference, const Mask& mask,
                               const WoodModelParams& params, double cut_margin)
    : texel_count_(params.distortion.values.size()), cut_margin_(cut_margin) {
  if (!reference.phase.same_shape(mask)) throw DimensionError("objective: mask shape mismatch");
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask(u, v) || !reference.is_valid(u, v)) continue;
      const TreePoint q = tree_point(params.pose, u, v);
      pixels_.push_back({q.r, reference.phase(u, v), distortion_stencil(params.distortion, q.r, q.z)});
    }
  if (pixels_.empty()) throw InsufficientDataError("phase objective: empty mask");
}

std::vector<double> PhaseObjective::pack(const WoodModelParams& params) const {
  std::vector<double> theta;
  theta.reserve(params.distortion.values.size() + 1);
  theta.push_back(params.pose.s_r);
  theta.insert(theta.end(), params.distortion.values.begin(), params.distortion.values.end());
  return theta;
}

std::vector<double> PhaseObjective::coverage() const {
  std::vector<double> cov(1 + texel_count_, 0.0);
  cov[0] = static_cast<double>(pixels_.size());
  for (const Pixel& px : pixels_)
    for (int k = 0; k < 4; ++k) cov[1 + px.stencil.index[k]] += px.stencil.weight[k];
  return cov;
}

void PhaseObjective::unpack(const std::vector<double>& theta, WoodModelParams& params) const {
  params.pose.s_r = theta[0];
  std::copy(theta.begin() + 1, theta.end(), params.distortion.values.begin());
}

LossGradient PhaseObjective::evaluate(const std::vector<double>& theta) const {
  const std::size_t n = pixels_.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  struct Contribution {
    double sq = 0.0;
    double d_s = 0.0;
    std::array<double, 4> d_t{};
  };
  std::vector<Contribution> contrib(n);

  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    ad::Tape tape;
    for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
      const Pixel& px = pixels_[i];
      tape.clear();
      const ad::Var s = tape.variable(theta[0]);
      std::array<ad::Var, 4> t;
      for (int k = 0; k < 4; ++k) t[k] = tape.variable(theta[1 + px.stencil.index[k]]);
      ad::Var m = t[0] * px.stencil.weight[0];
      for (int k = 1; k < 4; ++k) m = m + t[k] * px.stencil.weight[k];
      const ad::Var ring = (m + px.r) / s;
      const double whole = std::floor(ring.value);
      const ad::Var phi = (ring - whole) * kTwoPi;
      const double e = wrapped_diff(phi.value, px.target);
      // Constant shift so that the recorded difference equals the wrapped one.
      const ad::Var diff = phi - (phi.value - e);
      const ad::Var sq = ad::square(diff) * inv_n;

      Contribution& out = contrib[i];
      out.sq = e * e;
      if (ring.value == whole || std::abs(e) > kPi - cut_margin_) continue;
      const auto& adj = tape.gradient(sq);
      out.d_s = adj[s.index];
      for (int k = 0; k < 4; ++k) out.d_t[k] = adj[t[k].index];
    }
  });

  LossGradient lg;
  lg.grad.assign(theta.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Contribution& c = contrib[i];
    sum += c.sq;
    lg.grad[0] += c.d_s;
    for (int k = 0; k < 4; ++k) lg.grad[1 + pixels_[i].stencil.index[k]] += c.d_t[k];
  }
  lg.loss = sum * inv_n;
  return lg;
}

double PhaseObjective::loss(const std::vector<double>& theta) const {
  double sum = 0.0;
  for (const Pixel& px : pixels_) {
    double m = 0.0;
    for (int k = 0; k < 4; ++k) m += px.stencil.weight[k] * theta[1 + px.stencil.index[k]];
    const double ring = (px.r + m) / theta[0];
    const double phi = kTwoPi * (ring - std::floor(ring));
    const double e = wrapped_diff(phi, px.target);
    sum += e * e;
  }
  return sum / static_cast<double>(pixels_.size());
}

GradCheckResult grad_check(const PhaseImage& reference, const Mask& mask,
                           const WoodModelParams& params, int n_texels, std::uint64_t seed,
                           double exclusion) {
  GradCheckResult result;
  Mask subset = mask;
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask(u, v)) continue;
      const double ring = ring_coordinate(params, u, v);
      const double to_integer = std::abs(ring - std::round(ring));
      const double e = wrapped_diff(phase_of(ring), reference.phase(u, v));
      if (to_integer < exclusion || std::abs(e) > kPi - kTwoPi * exclusion) {
        subset(u, v) = 0;
        ++result.pixels_excluded;
      } else {
        ++result.pixels_used;
      }
    }
  const PhaseObjective obj(reference, subset, params);
  const auto theta = obj.pack(params);
  const auto analytic = obj.evaluate(theta).grad;

  const std::vector<double> coverage = obj.coverage();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i < theta.size(); ++i)
    if (coverage[i] >= 0.1) candidates.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(n_texels)));
  std::sort(candidates.begin(), candidates.end());
  candidates.insert(candidates.begin(), 0);

  const double h = 1e-4 * params.pose.s_r;
  for (std::size_t idx : candidates) {
    auto plus = theta, minus = theta;
    plus[idx] += h;
    minus[idx] -= h;
    const double fd = (obj.loss(plus) - obj.loss(minus)) / (2.0 * h);
    const double a = analytic[idx];
    const double denom = std::max(std::abs(a), std::abs(fd));
    const double rel = denom > 0.0 ? std::abs(a - fd) / denom : 0.0;
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked_parameters;
  }
  return result;
}

FitResult fit_distortion(const PhaseImage& reference, const Mask& mask,
                         const WoodModelParams& init, const FitConfig& config) {
  validate(config);
  const PhaseObjective obj(reference, mask, init, config.cut_margin);
  auto theta = obj.pack(init);
  Adam adam(theta.size(), config.adam());
  const DistortionTexture& shape = init.distortion;
  ScalarField step(shape.cols, shape.rows);
  FitResult result{init, {}};
  result.report.loss.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto lg = obj.evaluate(theta);
    if (!std::isfinite(lg.loss))
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    result.report.loss.push_back(lg.loss);
    if (!config.optimize_s_r) lg.grad[0] = 0.0;
    const std::vector<double> before = theta;
    adam.step(theta, lg.grad);
    if (config.step_smooth_texels > 0.0) {
      for (std::size_t i = 1; i < theta.size(); ++i) step.data()[i - 1] = theta[i] - before[i];
      const ScalarField blurred = gaussian_smooth(step, config.step_smooth_texels);
      for (std::size_t i = 1; i < theta.size(); ++i) theta[i] = before[i] + blurred.data()[i - 1];
    }
    if (!(theta[0] > 0.0))
      throw NumericError("ring scale left the positive range at epoch " + std::to_string(epoch));
  }
  const double final_loss = obj.loss(theta);
  if (!std::isfinite(final_loss)) throw NumericError("non-finite final loss");
  obj.unpack(theta, result.params);
  // Texels no masked pixel touches are unconstrained by the loss. They keep
  // their initial value plus the update of the nearest fitted texel, fading
  // to 0 with the rule of the initial guess.
  {
    DistortionTexture& tex = result.params.distortion;
    const std::vector<double> coverage = obj.coverage();
    ScalarField delta(tex.cols, tex.rows), dist(tex.cols, tex.rows);
    for (std::size_t k = 0; k < tex.values.size(); ++k) {
      const bool covered = coverage[k + 1] > 0.0;
      delta.data()[k] = covered ? tex.values[k] - shape.values[k] : 0.0;
      dist.data()[k] = covered ? 0.0 : kUnsupported;
    }
    fill_from_support(delta, dist, tex.r_step(), tex.z_step(),
                      config.idw_radius_rings * result.params.pose.s_r);
    for (std::size_t k = 0; k < tex.values.size(); ++k)
      if (!(coverage[k + 1] > 0.0)) tex.values[k] = shape.values[k] + delta.data()[k];
  }
  result.report.final_rmse = std::sqrt(final_loss);
  result.report.fold_over = has_fold_over(result.params.distortion);
  result.report.final_s_r = result.params.pose.s_r;
  return result;
}

ColorMap extract_colormap(const RgbImage& image, const WoodModelParams& params, int n_rings,
                          int samples_per_ring, const Mask* mask) {
  ColorMap cmap(n_rings, samples_per_ring);
  cmap.lookup = params.colormap.lookup;
  std::vector<Rgb> sum(cmap.values.size(), Rgb{0.0, 0.0, 0.0});
  std::vector<long> count(cmap.values.size(), 0);
  const ScalarField ring = render_ring_coordinate(params, image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (mask && !mask->data()[i]) continue;
    const auto g = growth_profile(ring.data()[i]);
    const int k = static_cast<int>(std::clamp<long>(g.ring, 0, n_rings - 1));
    const int s = std::clamp(static_cast<int>(std::floor(g.frac * samples_per_ring)), 0,
                             samples_per_ring - 1);
    const std::size_t b = static_cast<std::size_t>(k) * samples_per_ring + s;
    for (int c = 0; c < 3; ++c) sum[b][c] += image.data()[i][c];
    ++count[b];
  }
  std::vector<bool> ring_filled(n_rings, false);
  for (int k = 0; k < n_rings; ++k) {
    std::vector<int> filled;
    for (int s = 0; s < samples_per_ring; ++s) {
      const std::size_t b = static_cast<std::size_t>(k) * samples_per_ring + s;
      if (count[b] == 0) continue;
      for (int c = 0; c < 3; ++c) cmap.at(k, s)[c] = sum[b][c] / static_cast<double>(count[b]);
      filled.push_back(s);
    }
    if (filled.empty()) continue;
    ring_filled[k] = true;
    for (int s = 0; s < samples_per_ring; ++s) {
      if (count[static_cast<std::size_t>(k) * samples_per_ring + s]) continue;
      int best = filled.front();
      for (int f : filled)
        if (std::abs(f - s) < std::abs(best - s)) best = f;
      cmap.at(k, s) = cmap.at(k, best);
    }
  }
  std::vector<int> rings_with_data;
  for (int k = 0; k < n_rings; ++k)
    if (ring_filled[k]) rings_with_data.push_back(k);
  if (rings_with_data.empty()) throw InsufficientDataError("extract_colormap: every bin is empty");
  for (int k = 0; k < n_rings; ++k) {
    if (ring_filled[k]) continue;
    int best = rings_with_data.front();
    for (int f : rings_with_data)
      if (std::abs(f - k) < std::abs(best - k)) best = f;
    for (int s = 0; s < samples_per_ring; ++s) cmap.at(k, s) = cmap.at(best, s);
  }
  return cmap;
}

std::string format_fit_report(const FitReport& report) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < report.loss.size(); ++i)
    out += std::to_string(i) + "," + format_double(report.loss[i]) + "\n";
  return out;
}

std::string format_fit_summary(const FitReport& report) {
  return format_key_values({{"epochs", std::to_string(report.loss.size())},
                            {"initial_loss", report.loss.empty() ? "undefined" : format_double(report.loss.front())},
                            {"final_loss", format_double(report.final_rmse * report.final_rmse)},
                            {"final_rmse", format_double(report.final_rmse)},
                            {"final_s_r", format_double(report.final_s_r)},
                            {"fold_over", report.fold_over ? "true" : "false"}});
}

}  // namespace woodfit

namespace woodfit {

AxisEstimate phase_symmetry_axis(const PhaseImage& phase, int min_overlap, int row_step) {
  const int w = phase.width(), h = phase.height();
  if (min_overlap <= 0) min_overlap = std::max(8, w / 5);
  row_step = std::max(1, row_step);
  // Candidates on a half-pixel grid: c = k / 2.
  const int k_lo = 2 * min_overlap, k_hi = 2 * (w - 1 - min_overlap);
  AxisEstimate best;
  if (k_lo > k_hi) return best;
  std::vector<double> score(static_cast<std::size_t>(k_hi - k_lo + 1), -2.0);
  parallel_for(score.size(), [&](std::size_t idx) {
    const int k = k_lo + static_cast<int>(idx);
    double sum = 0.0;
    long n = 0;
    for (int v = 0; v < h; v += row_step)
      for (int a = k / 2 + 1, b = (k + 1) / 2 - 1; a < w && b >= 0; ++a, --b) {
        // a + b == k, so a and b mirror about k / 2.
        if (!phase.is_valid(a, v) || !phase.is_valid(b, v)) continue;
        sum += std::cos(phase.phase(a, v) + phase.phase(b, v));
        ++n;
      }
    if (n > 0) score[idx] = sum / static_cast<double>(n);
  });
  const auto it = std::max_element(score.begin(), score.end());
  const std::size_t i = static_cast<std::size_t>(it - score.begin());
  if (*it <= -2.0) return best;
  best.score = *it;
  double offset = 0.0;
  if (i > 0 && i + 1 < score.size()) {
    const double l = score[i - 1], c = score[i], r = score[i + 1];
    const double denom = l - 2.0 * c + r;
    if (denom < 0.0) offset = 0.5 * (l - r) / denom;
    best.found = true;
  }
  best.u_center = 0.5 * (k_lo + static_cast<double>(i) + offset);
  return best;
}

}  // namespace woodfit
