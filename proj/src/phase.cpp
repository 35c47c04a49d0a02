#include "woodfit/phase.hpp"

#include <cmath>

namespace woodfit {

double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  if (r > kPi) r -= kTwoPi;
  return r;
}

double wrapped_diff(double a, double b) { return wrap_angle(a - b); }

PhaseImage shift_phase(const PhaseImage& phase, double offset) {
  PhaseImage out = phase;
  for (std::size_t i = 0; i < out.phase.size(); ++i)
    if (out.valid.data()[i]) out.phase.data()[i] = wrap_angle(out.phase.data()[i] + offset);
  return out;
}

}  // namespace woodfit
