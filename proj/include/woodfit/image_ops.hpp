#pragma once

#include <vector>

#include "woodfit/raster.hpp"

namespace woodfit {

/// Per-pixel ring-tangent direction with a coherence weight. Directions are
/// 180 degree ambiguous: d and -d describe the same orientation.
struct OrientationField {
  Raster<Vec2> dirs;
  ScalarField coherence;

  int width() const { return dirs.width(); }
  int height() const { return dirs.height(); }

  /// Bilinear interpolation of the four surrounding directions after flipping
  /// each one into the half-plane of `reference`. Returns `reference` when the
  /// neighbourhood carries no coherent direction.
  Vec2 sample_aligned(Vec2 p, Vec2 reference) const;
};

struct Gradient {
  ScalarField gx;
  ScalarField gy;
};

/// Truncated (ceil(3 sigma)) renormalized kernel; sigma = 0 yields {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian smoothing with clamp-to-edge borders. sigma = 0 returns
/// an identical copy.
GrayImage gaussian_smooth(const GrayImage& img, double sigma);

/// 1D smoothing of a sequence with the same kernel and border policy.
std::vector<double> gaussian_smooth_1d(const std::vector<double>& values, double sigma);

/// 3x3 Scharr derivative: (3,10,3)/16 smoothing times (-1,0,1)/2 difference.
/// Throws DimensionError for images smaller than 3x3.
Gradient scharr_gradient(const ScalarField& img);

/// Box average over window_w x window_h with clamp-to-edge borders.
ScalarField box_mean(const ScalarField& field, int window_w, int window_h);

/// Window-averaged gradient orientation (doubled-angle averaging), rotated by
/// 90 degrees so that directions run along iso-intensity lines. Coherence is
/// |mean doubled-angle vector| / mean squared gradient magnitude.
OrientationField orientation_field(const Gradient& grad, int window_w, int window_h);

/// Axis of the field's dominant ring normal (doubled-angle mean, coherence
/// weighted), returned in the half-plane x > 0 (or y > 0 when x == 0).
/// Falls back to (1, 0) for fields without a dominant direction.
Vec2 dominant_normal_axis(const OrientationField& field);

}  // namespace woodfit
