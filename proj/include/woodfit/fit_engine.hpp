#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "woodfit/adam.hpp"
#include "woodfit/board_pose.hpp"
#include "woodfit/errors.hpp"
#include "woodfit/phase.hpp"
#include "woodfit/ring_tracer.hpp"
#include "woodfit/wood_model.hpp"

namespace woodfit {

struct FitConfig {
  double learning_rate = 0.03;  // 0 leaves every parameter unchanged
  int epochs = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double loss_mask_mag_min = 0.05;  // fraction of the mean Gabor magnitude
  bool optimize_s_r = true;
  int texture_rows = 256;
  int texture_cols = 256;
  double idw_radius_rings = 2.0;
  double idw_smooth_texels = 1.0;
  int kappa_range = 3;
  double cut_margin = 1e-3;  // radians from +-pi with zero gradient
  double axis_exclusion_rings = 0.5;
  double step_smooth_texels = 1.0;  // Gaussian blur of each Adam texel update

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

/// Throws std::invalid_argument when a field violates its documented range.
void validate(const FitConfig& config);

struct FitReport {
  std::vector<double> loss;  // loss at the start of each epoch
  double final_rmse = 0.0;   // sqrt of the loss after the last update
  bool fold_over = false;
  double final_s_r = 0.0;
};

/// Mean of wrapped_diff(J, I)^2 over mask pixels. Throws InsufficientDataError
/// for an empty mask.
double phase_loss(const PhaseImage& reference, const PhaseImage& render, const Mask& mask);

/// Phase pixels with u < u_center are replaced by wrap(-phi), so that phase
/// increases with radius on both sides of the tree axis. The rule is applied
/// as stated even when the axis projects outside the image (nothing flips for
/// an axis left of the image, everything for one on the right) and the
/// center_outside_image flag is raised. Applying it twice restores the input.
struct ResolvedPhase {
  PhaseImage phase;
  bool flipped = false;
  bool center_outside_image = false;
};
ResolvedPhase resolve_phase_sign(const PhaseImage& phase, const BoardPose& pose);

struct AxisEstimate {
  double u_center = 0.0;
  double score = 0.0;  // mean cos(phi(u_c + d) + phi(u_c - d)), 1 for perfect symmetry
  bool found = false;
};

/// Column about which the raw phase is odd-symmetric, phi(u_c + d, v) =
/// -phi(u_c - d, v). Candidates need at least `min_overlap` px of mirrored
/// support on both sides; `found` is false when no candidate qualifies or the
/// best one lies on the search boundary.
AxisEstimate phase_symmetry_axis(const PhaseImage& phase, int min_overlap = 0, int row_step = 4);

/// Gabor-magnitude mask: valid phase and magnitude >= fraction * mean.
Mask loss_mask(const PhaseImage& phase, const MagnitudeImage& magnitude, double fraction);

/// Clears pixels whose undistorted ring coordinate is within `rings` of its
/// minimum x_offset / s_r. Near the tree axis the rings turn back on
/// themselves and the filter straddles the sign flip, so the reference phase
/// there does not follow the ring coordinate.
void exclude_axis_band(Mask& mask, const BoardPose& pose, double rings);

/// Radial offsets that move every ring point onto its integer ring, spread
/// over the texture by inverse-distance weighting and a light Gaussian blur.
DistortionTexture initial_distortion(const RingSet& rings, const BoardPose& pose,
                                     const DistortionTexture& shape, const FitConfig& config = {});

/// Loss and gradient with respect to [s_r, texel 0, texel 1, ...].
struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Per-pixel geometry that stays fixed while the texture and s_r change.
class PhaseObjective {
 public:
  PhaseObjective(const PhaseImage& reference, const Mask& mask, const WoodModelParams& params,
                 double cut_margin = 1e-3);

  /// Evaluates with s_r = theta[0] and texels = theta[1..].
  LossGradient evaluate(const std::vector<double>& theta) const;
  double loss(const std::vector<double>& theta) const;

  std::size_t pixel_count() const { return pixels_.size(); }
  /// Summed bilinear weight of the masked pixels per entry of theta; entry 0
  /// (s_r) gets the pixel count.
  std::vector<double> coverage() const;
  std::vector<double> pack(const WoodModelParams& params) const;
  void unpack(const std::vector<double>& theta, WoodModelParams& params) const;

  struct Pixel {
    double r = 0.0;
    double target = 0.0;
    TexelStencil stencil;
  };
  const std::vector<Pixel>& pixels() const { return pixels_; }

 private:
  std::vector<Pixel> pixels_;
  std::size_t texel_count_;
  double cut_margin_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked_parameters = 0;
  int pixels_used = 0;
  int pixels_excluded = 0;
};

/// Compares the reverse-mode gradient of the phase loss against central
/// differences for s_r and `n_texels` random texels touched by the mask.
/// Pixels within `exclusion` (in ring units) of an integer ring coordinate or
/// near the wrap cut are removed first.
GradCheckResult grad_check(const PhaseImage& reference, const Mask& mask,
                           const WoodModelParams& params, int n_texels = 32,
                           std::uint64_t seed = 7, double exclusion = 1e-2);

/// Adam on the phase loss over all texels (and s_r when enabled). Each texel
/// update is blurred by step_smooth_texels before it is applied: the image
/// samples fewer radii than the texture has rows, and Adam's per-texel
/// normalisation otherwise lets unconstrained neighbour differences drift.
/// Texels no masked pixel touches finally take the update of the nearest
/// fitted texel, fading to 0 over idw_radius_rings rings.
/// Throws NumericError naming the epoch when the loss becomes non-finite.
struct FitResult {
  WoodModelParams params;
  FitReport report;
};
FitResult fit_distortion(const PhaseImage& reference, const Mask& mask,
                         const WoodModelParams& init, const FitConfig& config);

/// Bin average of the image colours per (ring, frac bin); empty bins take the
/// nearest filled bin of their ring, then empty rings the nearest filled ring.
ColorMap extract_colormap(const RgbImage& image, const WoodModelParams& params, int n_rings,
                          int samples_per_ring, const Mask* mask = nullptr);

std::string format_fit_report(const FitReport& report);
std::string format_fit_summary(const FitReport& report);

}  // namespace woodfit
