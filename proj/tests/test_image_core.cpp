#include <cmath>
#include <random>

#include "doctest.h"
#include "woodfit/image_ops.hpp"
#include "woodfit/phase.hpp"
#include "woodfit/raster.hpp"

using namespace woodfit;

namespace {

GrayImage make(int w, int h, auto f) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = f(x, y);
  return img;
}

double angle_between_axes(Vec2 a, Vec2 b) {
  const double c = std::abs(dot(a, b)) / (norm(a) * norm(b));
  return std::acos(std::min(1.0, c));
}

}  // namespace

TEST_CASE("raster basics") {
  Raster<int> r(3, 2, 7);
  CHECK(r.size() == 6);
  CHECK(r(2, 1) == 7);
  r(1, 0) = 4;
  CHECK(r.data()[1] == 4);
  CHECK(r.clamped(-5, 0) == 7);
  CHECK(r.clamped(1, -1) == 4);
  CHECK_THROWS_AS(Raster<int>(-1, 2), DimensionError);
}

TEST_CASE("bilinear sample") {
  ScalarField f(2, 2);
  f(0, 0) = 0;
  f(1, 0) = 1;
  f(0, 1) = 2;
  f(1, 1) = 3;
  CHECK(sample_bilinear(f, {0.5, 0.5}) == doctest::Approx(1.5));
  CHECK(sample_bilinear(f, {1.0, 0.0}) == 1.0);
  CHECK(sample_bilinear(f, {5.0, 5.0}) == 3.0);
}

TEST_CASE("normalized gray invariant") {
  GrayImage g(2, 2, 0.5);
  CHECK(is_normalized(g));
  g(0, 0) = 1.5;
  CHECK_FALSE(is_normalized(g));
  g(0, 0) = std::nan("");
  CHECK_FALSE(is_normalized(g));
}

TEST_CASE("gaussian_smooth") {
  SUBCASE("constant preserved") {
    const GrayImage c(20, 15, 0.5);
    const GrayImage s = gaussian_smooth(c, 2.0);
    for (double v : s.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("sigma 0 is identity") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    const GrayImage img = make(9, 7, [&](int, int) { return u(rng); });
    CHECK(gaussian_smooth(img, 0.0) == img);
  }
  SUBCASE("impulse matches the truncated kernel") {
    GrayImage img(33, 33, 0.0);
    img(16, 16) = 1.0;
    const double sigma = 1.5;
    const int half = static_cast<int>(std::ceil(3 * sigma));
    double total = 0.0;
    for (int i = -half; i <= half; ++i) total += std::exp(-i * i / (2 * sigma * sigma));
    const double w0 = 1.0 / total;
    const double w2 = std::exp(-4.0 / (2 * sigma * sigma)) / total;
    const GrayImage s = gaussian_smooth(img, sigma);
    CHECK(s(16, 16) == doctest::Approx(w0 * w0).epsilon(1e-12));
    CHECK(s(18, 16) == doctest::Approx(w2 * w0).epsilon(1e-12));
    double sum = 0.0;
    for (double v : s.data()) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("linear") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    const GrayImage a = make(24, 17, [&](int, int) { return u(rng); });
    const GrayImage b = make(24, 17, [&](int, int) { return u(rng); });
    const GrayImage mix = make(24, 17, [&](int x, int y) { return 0.3 * a(x, y) + 1.7 * b(x, y); });
    const GrayImage sa = gaussian_smooth(a, 1.3), sb = gaussian_smooth(b, 1.3), sm = gaussian_smooth(mix, 1.3);
    for (std::size_t i = 0; i < sm.size(); ++i)
      CHECK(std::abs(sm.data()[i] - (0.3 * sa.data()[i] + 1.7 * sb.data()[i])) < 1e-6);
  }
  SUBCASE("1d variant agrees with the kernel") {
    const std::vector<double> v{0, 0, 0, 1, 0, 0, 0};
    const auto k = gaussian_kernel(1.0);
    const auto s = gaussian_smooth_1d(v, 1.0);
    CHECK(s[3] == doctest::Approx(k[k.size() / 2]));
  }
}

TEST_CASE("scharr_gradient") {
  SUBCASE("constant") {
    const Gradient g = scharr_gradient(GrayImage(8, 8, 0.3));
    for (double v : g.gx.data()) CHECK(v == 0.0);
    for (double v : g.gy.data()) CHECK(v == 0.0);
  }
  SUBCASE("horizontal ramp") {
    const double a = 0.01;
    const Gradient g = scharr_gradient(make(10, 8, [&](int x, int) { return a * x; }));
    for (int y = 1; y < 7; ++y)
      for (int x = 1; x < 9; ++x) {
        CHECK(g.gx(x, y) == doctest::Approx(a).epsilon(1e-12));
        CHECK(std::abs(g.gy(x, y)) < 1e-15);
      }
  }
  SUBCASE("transpose symmetry") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    const GrayImage img = make(7, 5, [&](int, int) { return u(rng); });
    const GrayImage t = make(5, 7, [&](int x, int y) { return img(y, x); });
    const Gradient g = scharr_gradient(img), gt = scharr_gradient(t);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x) {
        CHECK(gt.gx(y, x) == doctest::Approx(g.gy(x, y)).epsilon(1e-12));
        CHECK(gt.gy(y, x) == doctest::Approx(g.gx(x, y)).epsilon(1e-12));
      }
  }
  SUBCASE("too small") { CHECK_THROWS_AS(scharr_gradient(GrayImage(2, 5)), DimensionError); }
}

TEST_CASE("box_mean") {
  const GrayImage img = make(5, 1, [](int x, int) { return double(x); });
  const ScalarField m = box_mean(img, 3, 1);
  CHECK(m(2, 0) == doctest::Approx(2.0));
  CHECK(m(0, 0) == doctest::Approx((0.0 + 0.0 + 1.0) / 3.0));
}

TEST_CASE("orientation_field") {
  SUBCASE("horizontal stripes") {
    const GrayImage img = make(64, 64, [](int, int y) { return 0.5 + 0.5 * std::cos(kTwoPi * y / 10.0); });
    const OrientationField f = orientation_field(scharr_gradient(img), 15, 15);
    for (int y = 10; y < 54; ++y)
      for (int x = 10; x < 54; ++x) CHECK(std::abs(f.dirs(x, y).x) > 0.99);
  }
  SUBCASE("flat image") {
    const OrientationField f = orientation_field(scharr_gradient(GrayImage(16, 16, 0.2)), 5, 5);
    for (std::size_t i = 0; i < f.dirs.size(); ++i) {
      CHECK(f.coherence.data()[i] == 0.0);
      CHECK(f.dirs.data()[i] == Vec2{1.0, 0.0});
    }
  }
  SUBCASE("concentric circles") {
    const Vec2 c{64, 64};
    const GrayImage img = make(129, 129, [&](int x, int y) {
      return 0.5 + 0.5 * std::cos(kTwoPi * norm(Vec2{double(x), double(y)} - c) / 8.0);
    });
    const OrientationField f = orientation_field(scharr_gradient(img), 15, 15);
    int checked = 0;
    for (int y = 0; y < 129; y += 3)
      for (int x = 0; x < 129; x += 3) {
        const Vec2 d = Vec2{double(x), double(y)} - c;
        const double r = norm(d);
        if (r <= 20.0 || r > 56.0) continue;
        CHECK(std::abs(kPi / 2 - angle_between_axes(f.dirs(x, y), d)) < 2.0 * kPi / 180.0);
        CHECK(std::abs(norm(f.dirs(x, y)) - 1.0) < 1e-6);
        ++checked;
      }
    CHECK(checked > 100);
  }
  SUBCASE("gradient sign flip leaves the field unchanged") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    const GrayImage img = make(20, 20, [&](int, int) { return u(rng); });
    Gradient g = scharr_gradient(img);
    const OrientationField a = orientation_field(g, 5, 7);
    for (double& v : g.gx.data()) v = -v;
    for (double& v : g.gy.data()) v = -v;
    const OrientationField b = orientation_field(g, 5, 7);
    CHECK(a.dirs == b.dirs);
    CHECK(a.coherence == b.coherence);
  }
  SUBCASE("rotating the image rotates the field") {
    const GrayImage img = make(48, 48, [](int x, int y) {
      return 0.5 + 0.5 * std::cos(kTwoPi * (0.8 * y + 0.6 * x) / 9.0);
    });
    // rot(x, y) = img(y, 47 - x): a 90 degree rotation
    const GrayImage rot = make(48, 48, [&](int x, int y) { return img(y, 47 - x); });
    const OrientationField a = orientation_field(scharr_gradient(img), 9, 9);
    const OrientationField b = orientation_field(scharr_gradient(rot), 9, 9);
    for (int y = 12; y < 36; ++y)
      for (int x = 12; x < 36; ++x) {
        const Vec2 da = a.dirs(y, 47 - x);
        const Vec2 expected{da.y, -da.x};
        CHECK(angle_between_axes(b.dirs(x, y), expected) < 1e-3);
      }
  }
}

TEST_CASE("dominant normal axis") {
  const GrayImage img = make(40, 40, [](int x, int) { return 0.5 + 0.5 * std::cos(kTwoPi * x / 7.0); });
  const Vec2 n = dominant_normal_axis(orientation_field(scharr_gradient(img), 9, 9));
  CHECK(n.x > 0.999);
  CHECK(dominant_normal_axis(orientation_field(scharr_gradient(GrayImage(10, 10, 0.0)), 3, 3)) ==
        Vec2{1.0, 0.0});
}

TEST_CASE("rgb to gray mean") {
  RgbImage img(1, 1, Rgb{0.3, 0.6, 0.9});
  CHECK(rgb_to_gray_mean(img)(0, 0) == doctest::Approx(0.6));
}
