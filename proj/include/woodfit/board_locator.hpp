#pragma once

#include <vector>

#include "woodfit/board_pose.hpp"
#include "woodfit/errors.hpp"
#include "woodfit/ring_tracer.hpp"

namespace woodfit {

/// Sorted u positions where the rings cross row v. Crossings of one ring closer
/// than 2 px are merged. Throws InsufficientDataError below 3 positions.
std::vector<double> ring_scanline_positions(const RingSet& rings, double v);

enum class CenterSide { inside, left, right };

struct CenterEstimate {
  double u_center = 0.0;
  double score = 0.0;       // fraction of gap pairs shrinking away from the center
  std::size_t gap_index = 0;  // index of the widest gap
  bool outside = false;
  CenterSide side = CenterSide::inside;
};

/// Midpoint of the widest gap between adjacent positions. The center is
/// flagged as outside when the score is below 0.7 or the widest gap is at
/// either end; gaps widen toward the tree axis, so increasing gaps point to
/// a center beyond the right end. Needs >= 4 positions.
CenterEstimate find_center_projection(const std::vector<double>& positions);

/// Median adjacent gap (scale * s_r in px). When `center` lies inside, the
/// widest gap and its two neighbours are left out.
double estimate_scale(const std::vector<double>& positions,
                      const CenterEstimate* center = nullptr);

struct PoseGrid {
  double x_half_rings = 3.0;   // x_offset search half-width in rings
  double x_step_rings = 0.05;
  double scale_half = 0.20;    // relative
  double scale_step = 0.01;
  double z_step_rings = 0.05;  // z_origin in [0, s_r)
  bool refine = true;          // second, finer pass including u_center
  double u_half = 3.0;         // px, refinement only
  double u_step = 0.25;
};

/// Mean squared distance of the ring points' ring coordinate to the nearest
/// integer (zero distortion).
double pose_loss(const RingSet& rings, const BoardPose& pose);

/// Initial pose from crossings of `row`: u_center from the widest gap (median
/// over several rows when available), ring width and x_offset from a least
/// squares fit of y^2 = k^2 s^2 - x^2 over consecutive rings. Uses scale = 1.
BoardPose initial_pose(const RingSet& rings, int width, int height);

/// Exhaustive search around `init` minimizing pose_loss; ties resolve to the
/// lexicographically smallest (x_offset, scale, z_origin).
BoardPose brute_force_pose(const RingSet& rings, const BoardPose& init, const PoseGrid& grid = {});

/// initial_pose followed by brute_force_pose, reported with scale = 1.
BoardPose locate_board(const RingSet& rings, int width, int height, const PoseGrid& grid = {});

}  // namespace woodfit
