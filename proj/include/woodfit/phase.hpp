#pragma once

#include <numbers>

#include "woodfit/raster.hpp"

namespace woodfit {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Maps an angle to (-pi, pi]; an exact -pi representative becomes +pi.
double wrap_angle(double a);

/// Cyclic difference a - b in (-pi, pi], tie at +-pi resolved to +pi.
double wrapped_diff(double a, double b);

/// Phase in (-pi, pi] plus a validity mask (pixels never touched by the
/// filter, or otherwise undefined, have valid == 0).
struct PhaseImage {
  ScalarField phase;
  Mask valid;

  int width() const { return phase.width(); }
  int height() const { return phase.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
};

/// wrap(phi + offset) on every valid pixel.
PhaseImage shift_phase(const PhaseImage& phase, double offset);

using MagnitudeImage = ScalarField;

struct PhaseMagnitude {
  PhaseImage phase;
  MagnitudeImage magnitude;
};

}  // namespace woodfit
