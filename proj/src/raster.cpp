#include "woodfit/raster.hpp"

#include <algorithm>

namespace woodfit {

double sample_bilinear(const ScalarField& img, Vec2 p) {
  const double x = std::clamp(p.x, 0.0, img.width() - 1.0);
  const double y = std::clamp(p.y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double a = img.clamped(x0, y0);
  const double b = img.clamped(x0 + 1, y0);
  const double c = img.clamped(x0, y0 + 1);
  const double d = img.clamped(x0 + 1, y0 + 1);
  return (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy;
}

bool is_normalized(const GrayImage& img) {
  return std::all_of(img.data().begin(), img.data().end(), [](double v) {
    return std::isfinite(v) && v >= 0.0 && v <= 1.0;
  });
}

GrayImage rgb_to_gray_mean(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& c = img.data()[i];
    out.data()[i] = (c[0] + c[1] + c[2]) / 3.0;
  }
  return out;
}

}  // namespace woodfit
