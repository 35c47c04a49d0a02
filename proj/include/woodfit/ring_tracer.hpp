#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "woodfit/image_ops.hpp"
#include "woodfit/phase.hpp"
#include "woodfit/raster.hpp"

namespace woodfit {

struct RingTrace {
  std::vector<Vec2> points;
  bool closed = false;
  double seed_magnitude = 0.0;
};

struct RingSet {
  std::vector<RingTrace> rings;
};

struct TracerConfig {
  double tol = 0.2;                // radians
  double mag_min_fraction = 0.05;  // of the mean valid magnitude
  double step = 1.0;               // px
  int gap_max = 10;                // consecutive invalid steps tolerated
  int max_steps = 0;               // 0 selects 4 x image perimeter
  double min_separation = 4.0;     // px
  int min_points = 16;             // shorter traces are dropped
  double ring_phase = kPi / 2.0;
  double reference_row = -1.0;     // negative selects height / 2
};

struct Seed {
  Vec2 position;
  double magnitude = 0.0;
};

/// Pixels whose phase is within `tol` of `ring_phase` and whose magnitude is at
/// least `mag_min`, each moved along the phase gradient onto the level set
/// (at most 1 px). Ordered by decreasing magnitude, then row-major.
std::vector<Seed> find_seeds(const PhaseImage& phase, const MagnitudeImage& magnitude, double tol,
                             double mag_min, double ring_phase = kPi / 2.0);

/// Mean magnitude over valid phase pixels times the configured fraction.
double magnitude_threshold(const PhaseImage& phase, const MagnitudeImage& magnitude,
                           double fraction);

/// Phase gradient from wrapped central differences (one-sided at borders or
/// next to invalid pixels). Zero when neither neighbour is usable.
Vec2 phase_gradient(const PhaseImage& phase, int x, int y);

/// Walks the ring through `seed` in both directions. `mag_min` gates which
/// steps count as supported. Throws std::invalid_argument when the seed lies
/// outside the image or on an invalid phase pixel.
RingTrace trace_ring(const PhaseImage& phase, const MagnitudeImage& magnitude,
                     const OrientationField& orient, Vec2 seed, double mag_min,
                     const TracerConfig& config = {});

/// Median over the points of `a` of the distance to the nearest point of `b`,
/// with distances capped at `cap`.
double directed_median_distance(const RingTrace& a, const RingTrace& b, double cap);

/// Keeps the longest of any group of traces closer than min_separation (ties:
/// higher seed magnitude) and sorts the result along the reference row.
RingSet dedup_rings(std::vector<RingTrace> traces, double min_separation, double reference_row);

/// Position of a trace along the reference row: the x of its crossing of
/// `row`, or of its point nearest to that row when it does not cross.
double reference_position(const RingTrace& trace, double row);

/// Seeds, traces and deduplicates every ring of a phase image.
RingSet trace_all(const PhaseImage& phase, const MagnitudeImage& magnitude,
                  const OrientationField& orient, const TracerConfig& config = {});

std::string format_ring_set(const RingSet& rings);
RingSet parse_ring_set(std::string_view text);
RingSet read_ring_set(const std::filesystem::path& path);
void write_ring_set(const std::filesystem::path& path, const RingSet& rings);

}  // namespace woodfit
