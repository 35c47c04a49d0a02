#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "woodfit/board_pose.hpp"
#include "woodfit/phase.hpp"
#include "woodfit/raster.hpp"

namespace woodfit {

/// Radial distortion m_r on a regular (r, z) grid. Node (i, j) sits at
/// r = i * r_max / (rows - 1), z = j * z_max / (cols - 1).
struct DistortionTexture {
  int rows = 2;
  int cols = 2;
  double r_max = 1.0;
  double z_max = 1.0;
  std::vector<double> values;  // row-major, rows x cols

  DistortionTexture() = default;
  DistortionTexture(int rows, int cols, double r_max, double z_max, double fill = 0.0);

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
  double r_step() const { return r_max / (rows - 1); }
  double z_step() const { return z_max / (cols - 1); }
};

/// The four texels and weights of a bilinear lookup (weights sum to 1).
struct TexelStencil {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
  double dm_dr = 0.0;  // derivative of the interpolant along r
};

TexelStencil distortion_stencil(const DistortionTexture& tex, double r, double z);

/// Bilinear interpolation, clamp-to-edge outside [0, r_max] x [0, z_max].
double sample_distortion(const DistortionTexture& tex, double r, double z);

enum class ColorLookup { linear, nearest };

/// Per-ring colour table. Entry (k, s) describes the within-ring fraction bin
/// [s, s + 1) / samples_per_ring; its node sits at the bin center.
struct ColorMap {
  int n_rings = 1;
  int samples_per_ring = 1;
  std::vector<Rgb> values;  // n_rings x samples_per_ring
  ColorLookup lookup = ColorLookup::linear;

  ColorMap() = default;
  ColorMap(int n_rings, int samples_per_ring, Rgb fill = {0.0, 0.0, 0.0});

  Rgb& at(int ring, int s) { return values[static_cast<std::size_t>(ring) * samples_per_ring + s]; }
  const Rgb& at(int ring, int s) const {
    return values[static_cast<std::size_t>(ring) * samples_per_ring + s];
  }
  /// Ring index is clamped to [0, n_rings - 1]; linear lookup interpolates
  /// between bin centers, extrapolates past the end nodes and clamps to [0, 1].
  Rgb color(long ring, double frac) const;
};

struct WoodModelParams {
  BoardPose pose;  // pose.s_r is the ring scale
  DistortionTexture distortion;
  ColorMap colormap;
  double m_t = 0.0;  // tangential distortion, unused
};

struct TreePoint {
  double r = 0.0;  // undistorted radius
  double z = 0.0;
};

TreePoint tree_point(const BoardPose& pose, double u, double v);

/// r + m_r(r, z).
double distorted_radius(const WoodModelParams& params, TreePoint q);

/// Continuous ring coordinate U = r' / s_r of a pixel.
double ring_coordinate(const WoodModelParams& params, double u, double v);

/// wrap(2 pi frac(U)).
double phase_of(double ring_coord);

struct GrowthPosition {
  long ring = 0;
  double frac = 0.0;  // in [0, 1)
};
GrowthPosition growth_profile(double ring_coord);

/// Ring coordinate of every pixel.
ScalarField render_ring_coordinate(const WoodModelParams& params, int width, int height);
PhaseImage render_phase(const WoodModelParams& params, int width, int height);
RgbImage render_color(const WoodModelParams& params, int width, int height);

/// Partial derivative of the rendered phase with respect to s_r; 0 at
/// integer U where the phase jumps.
double phase_derivative_s_r(const WoodModelParams& params, double u, double v);

/// Texture covering the image footprint of `pose` plus a one-ring margin.
DistortionTexture footprint_texture(const BoardPose& pose, int width, int height, int rows = 256,
                                    int cols = 256);

/// True when r + m_r(r, z) fails to increase between two consecutive texel
/// rows of any column.
bool has_fold_over(const DistortionTexture& tex);

std::string format_texture(const DistortionTexture& tex);
DistortionTexture parse_texture(std::string_view text);
DistortionTexture read_texture(const std::filesystem::path& path);
void write_texture(const std::filesystem::path& path, const DistortionTexture& tex);

std::string format_colormap(const ColorMap& cmap);
ColorMap parse_colormap(std::string_view text);
ColorMap read_colormap(const std::filesystem::path& path);
void write_colormap(const std::filesystem::path& path, const ColorMap& cmap);

/// Whitespace separated "W H" header followed by H rows of W values.
std::string format_grid(const ScalarField& field);
ScalarField parse_grid(std::string_view text);

}  // namespace woodfit
