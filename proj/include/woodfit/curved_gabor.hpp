#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "woodfit/image_ops.hpp"
#include "woodfit/phase.hpp"
#include "woodfit/raster.hpp"

namespace woodfit {

/// A (2p+1) x (2q+1) sampling grid bent along the orientation field.
/// Contour i in [-p, p] sits i steps along the local ring normal from the
/// center; point j in [-q, q] sits j steps along the contour.
struct CurvedRegion {
  Vec2 center;
  int p = 0;
  int q = 0;
  Vec2 normal{1.0, 0.0};  // patch x axis at the center
  std::vector<Vec2> coords;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  int contours() const { return 2 * p + 1; }
  int points_per_contour() const { return 2 * q + 1; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i + p) * (2 * q + 1) + static_cast<std::size_t>(j + q);
  }
  Vec2 coord(int i, int j) const { return coords[index(i, j)]; }
  double value(int i, int j) const { return values[index(i, j)]; }
  bool is_valid(int i, int j) const { return valid[index(i, j)] != 0; }

  /// Allocates storage for the given half extents (all samples invalid).
  static CurvedRegion empty(Vec2 center, int p, int q);
};

/// Builds the curved region around `center`. The perpendicular walk starts in
/// the direction of the ring normal lying in the half-plane of `normal_axis`,
/// which fixes the sign of the patch frame. Throws std::out_of_range when the
/// center lies outside the image.
CurvedRegion trace_curved_region(const GrayImage& img, const OrientationField& orient,
                                 Vec2 center, int p, int q, Vec2 normal_axis = {1.0, 0.0});

struct FrequencyOptions {
  double f_min = 1.0 / 200.0;
  double f_max = 1.0 / 4.0;
  // Peaks must rise above the higher neighbouring trough by this much, both
  // absolutely and relative to the profile range.
  double min_prominence = 1e-3;
  double min_relative_prominence = 0.1;
};

/// Ring frequency (cycles/pixel) from the peaks of the across-contour profile,
/// or nullopt when fewer than two peaks are found or the result is out of band.
std::optional<double> estimate_frequency(const CurvedRegion& region,
                                         const FrequencyOptions& options = {});

/// Profile used by estimate_frequency: mean of each contour's valid samples,
/// restricted to the longest run of contours that have any valid sample.
std::vector<double> contour_profile(const CurvedRegion& region);

/// Mean 180-degree-ambiguous angle between the orientation at each contour's
/// middle point and at its two end points (radians, each term <= pi/2).
double local_curvature(const OrientationField& orient, const CurvedRegion& region);

struct GaborParams {
  double theta = 0.0;      // radians
  double frequency = 0.1;  // cycles/pixel
  double sigma_x = 5.0;    // pixels
  double sigma_y = 15.0;   // pixels
  int half_size = 45;      // pixels
};

/// Complex Gabor kernel value exp(-(x_t^2/sx^2 + y_t^2/sy^2)/2) * exp(i 2 pi f x_t)
/// with x_t = x cos t + y sin t, y_t = -x sin t + y cos t.
/// Throws std::invalid_argument for non-positive frequency or sigma.
std::complex<double> gabor_value(const GaborParams& params, double x, double y);

struct GaborKernel {
  int half_size = 0;
  std::vector<std::complex<double>> taps;

  std::complex<double> at(int x, int y) const {
    return taps[static_cast<std::size_t>(y + half_size) * (2 * half_size + 1) + (x + half_size)];
  }
};

GaborKernel gabor_kernel(const GaborParams& params);

/// Gabor parameters tied to local wavelength: sigma_x = sx_periods / f,
/// sigma_y = sy_periods / f, half_size = ceil(3 max(sigma_x, sigma_y)).
GaborParams gabor_params_for(double frequency, double sx_periods = 0.5,
                             double sy_periods = 1.5);

enum class AccumulationWeight { uniform, coherence };

struct GaborConfig {
  int p = 80;
  int q = 80;
  int stride = 4;
  int splat_radius = 3;
  int frequency_stride = 8;
  double sigma_x_periods = 0.5;
  double sigma_y_periods = 1.5;
  FrequencyOptions frequency;
  double curvature_threshold = 0.6;  // radians
  std::optional<Vec2> normal_axis;   // dominant field axis when unset
  AccumulationWeight weighting = AccumulationWeight::uniform;
};

/// Convolution of the mean-subtracted region with the theta = 0 kernel,
/// evaluated at the (2r+1)^2 patch positions |i|, |j| <= r around the center.
/// Output index: (i + r) * (2r + 1) + (j + r). Invalid samples contribute 0.
std::vector<std::complex<double>> filter_patch(const CurvedRegion& region,
                                               const GaborParams& params, int radius);

struct FrequencyMap {
  ScalarField frequency;  // cycles/pixel, meaningful where valid
  Mask valid;
};

struct RegionAnalysis {
  FrequencyMap frequency;
  ScalarField curvature;  // radians
  Mask anomaly;           // curvature above threshold
};

/// Frequency and curvature on a frequency_stride grid, cleaned with a 3x3
/// median over valid grid cells. Validity, curvature and anomaly come from
/// the nearest grid cell; frequency is bilinear between valid cells.
RegionAnalysis analyze_regions(const GrayImage& img, const OrientationField& orient,
                               const GaborConfig& config);

struct ComplexResponse {
  ScalarField re;
  ScalarField im;
  ScalarField weight;

  int width() const { return re.width(); }
  int height() const { return re.height(); }
};

/// Seeds one curved patch per stride-grid pixel with valid frequency, filters
/// it and splats the central (2 splat_radius + 1)^2 outputs back to their
/// nearest image pixels, weighted by a tent (1 - |i|/(r+1)) (1 - |j|/(r+1)).
/// The response is the weight-normalized sum; the merge runs in seed order so
/// the result does not depend on the worker count.
ComplexResponse filter_image(const GrayImage& img, const OrientationField& orient,
                             const FrequencyMap& freq, const GaborConfig& config);

/// Magnitude sqrt(re^2 + im^2) and phase atan2(im, re) in (-pi, pi];
/// pixels with zero weight are flagged invalid.
PhaseMagnitude phase_magnitude(const ComplexResponse& resp);

/// Orientation of the phase image: gradients of the (cos phi, sin phi) pair
/// combined into a wrap-free phase gradient, then averaged as in
/// orientation_field.
OrientationField refined_orientation(const PhaseImage& phase, int window_w, int window_h);

}  // namespace woodfit
