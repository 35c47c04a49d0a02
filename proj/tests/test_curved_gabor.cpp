#include <cmath>
#include <complex>

#include "doctest.h"
#include "woodfit/curved_gabor.hpp"

using namespace woodfit;

namespace {

GrayImage make(int w, int h, auto f) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = f(double(x), double(y));
  return img;
}

OrientationField field_of(const GrayImage& img, int window = 15) {
  return orientation_field(scharr_gradient(img), window, window);
}

CurvedRegion profile_region(int p, auto profile) {
  CurvedRegion r = CurvedRegion::empty({0, 0}, p, 2);
  for (int i = -p; i <= p; ++i)
    for (int j = -2; j <= 2; ++j) {
      r.values[r.index(i, j)] = profile(i);
      r.valid[r.index(i, j)] = 1;
    }
  return r;
}

FrequencyMap constant_frequency(int w, int h, double f) {
  return {ScalarField(w, h, f), Mask(w, h, 1)};
}

GaborConfig small_config() {
  GaborConfig c;
  c.p = 30;
  c.q = 30;
  c.stride = 4;
  return c;
}

}  // namespace

TEST_CASE("trace_curved_region") {
  SUBCASE("degenerate region samples the center") {
    const GrayImage img = make(10, 10, [](double x, double y) { return 0.01 * x * y; });
    const CurvedRegion r = trace_curved_region(img, field_of(img, 3), {4.3, 5.6}, 0, 0);
    REQUIRE(r.values.size() == 1);
    CHECK(r.value(0, 0) == doctest::Approx(sample_bilinear(img, {4.3, 5.6})));
  }
  SUBCASE("straight stripes give a lattice") {
    const GrayImage img = make(60, 60, [](double, double y) { return 0.5 + 0.5 * std::cos(kTwoPi * y / 10); });
    const Vec2 c{30, 30};
    const CurvedRegion r = trace_curved_region(img, field_of(img), c, 5, 5, {0.0, 1.0});
    CHECK(r.coord(0, 0) == c);
    for (int i = -5; i <= 5; ++i)
      for (int j = -5; j <= 5; ++j) {
        const Vec2 d = r.coord(i, j) - c;
        CHECK(std::abs(d.y - i) < 1e-3);
        CHECK(std::abs(std::abs(d.x) - std::abs(j)) < 1e-3);
      }
  }
  SUBCASE("circle contour follows the ring") {
    const Vec2 cc{150, 150};
    const GrayImage img = make(300, 300, [&](double x, double y) {
      return 0.5 + 0.5 * std::cos(kTwoPi * norm(Vec2{x, y} - cc) / 10);
    });
    const OrientationField orient = field_of(img);
    const CurvedRegion r = trace_curved_region(img, orient, {250, 150}, 3, 40);
    for (int j = -40; j <= 40; ++j) CHECK(std::abs(norm(r.coord(0, j) - cc) - 100.0) < 0.5);
    SUBCASE("unit steps along every contour") {
      for (int i = -3; i <= 3; ++i)
        for (int j = -40; j < 40; ++j) CHECK(std::abs(norm(r.coord(i, j + 1) - r.coord(i, j)) - 1.0) < 1e-6);
      for (int i = -3; i < 3; ++i) CHECK(std::abs(norm(r.coord(i + 1, 0) - r.coord(i, 0)) - 1.0) < 1e-6);
    }
    SUBCASE("curvature matches the arc angle") {
      CHECK(local_curvature(orient, r) == doctest::Approx(0.4).epsilon(0.15));
    }
  }
  SUBCASE("out-of-image samples are invalid") {
    const GrayImage img(20, 20, 0.5);
    const CurvedRegion r = trace_curved_region(img, field_of(img, 3), {10, 1}, 4, 0);
    int invalid = 0;
    for (auto v : r.valid) invalid += v == 0;
    CHECK(invalid > 0);
    CHECK_THROWS_AS(trace_curved_region(img, field_of(img, 3), {25, 10}, 1, 1), std::out_of_range);
  }
}

TEST_CASE("estimate_frequency") {
  SUBCASE("period 10") {
    const auto f = estimate_frequency(profile_region(40, [](int i) { return std::cos(kTwoPi * i / 10.0); }));
    REQUIRE(f);
    CHECK(*f == doctest::Approx(0.1).epsilon(0.05));
  }
  SUBCASE("period 25") {
    const auto f = estimate_frequency(profile_region(80, [](int i) { return std::cos(kTwoPi * i / 25.0); }));
    REQUIRE(f);
    CHECK(std::abs(*f - 0.04) <= 0.002);
  }
  SUBCASE("constant profile is invalid") {
    CHECK_FALSE(estimate_frequency(profile_region(40, [](int) { return 0.3; })));
  }
  SUBCASE("out of band is invalid") {
    CHECK_FALSE(estimate_frequency(profile_region(40, [](int i) { return std::cos(kTwoPi * i / 3.0); })));
  }
  SUBCASE("all invalid") {
    CHECK_FALSE(estimate_frequency(CurvedRegion::empty({0, 0}, 10, 10)));
  }
}

TEST_CASE("gabor kernel analytic values") {
  const GaborParams g{0.0, 0.1, 5.0, 15.0, 45};
  CHECK(gabor_value(g, 0, 0) == std::complex<double>(1.0, 0.0));
  for (double x : {1.0, 2.5, 7.0})
    for (double y : {0.0, -3.0, 4.0}) {
      CHECK(std::abs(gabor_value(g, x, y).real() - gabor_value(g, -x, y).real()) < 1e-12);
      CHECK(std::abs(gabor_value(g, x, y).imag() + gabor_value(g, -x, y).imag()) < 1e-12);
    }
  const double x0 = 1.0 / (4.0 * g.frequency);
  const auto k = gabor_value(g, x0, 0.0);
  CHECK(std::abs(k.real()) < 1e-12);
  CHECK(std::abs(k.imag() - std::exp(-x0 * x0 / (2.0 * g.sigma_x * g.sigma_x))) < 1e-12);
  // rotated coordinates
  const GaborParams r{kPi / 2, 0.1, 5.0, 15.0, 45};
  CHECK(std::abs(gabor_value(r, 0.0, 2.0) - gabor_value(g, 2.0, 0.0)) < 1e-12);
  CHECK_THROWS_AS(gabor_value({0.0, 0.0, 1.0, 1.0, 3}, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gabor_value({0.0, 0.1, -1.0, 1.0, 3}, 0, 0), std::invalid_argument);

  const GaborKernel kern = gabor_kernel(g);
  CHECK(kern.taps.size() == 91u * 91u);
  CHECK(kern.at(3, -2) == gabor_value(g, 3, -2));

  const GaborParams auto_p = gabor_params_for(0.1);
  CHECK(auto_p.sigma_x == doctest::Approx(5.0));
  CHECK(auto_p.sigma_y == doctest::Approx(15.0));
  CHECK(auto_p.half_size == 45);
}

TEST_CASE("phase_magnitude") {
  ComplexResponse r{ScalarField(4, 1), ScalarField(4, 1), ScalarField(4, 1, 1.0)};
  r.re(0, 0) = 0;
  r.im(0, 0) = 1;
  r.re(1, 0) = -1;
  r.im(1, 0) = 0;
  r.re(2, 0) = 3;
  r.im(2, 0) = 4;
  r.weight(3, 0) = 0.0;
  const PhaseMagnitude pm = phase_magnitude(r);
  CHECK(pm.phase.phase(0, 0) == doctest::Approx(kPi / 2));
  CHECK(pm.magnitude(0, 0) == doctest::Approx(1.0));
  CHECK(pm.phase.phase(1, 0) == kPi);
  CHECK(pm.phase.phase(2, 0) == doctest::Approx(0.9272952180016122));
  CHECK(pm.magnitude(2, 0) == doctest::Approx(5.0));
  CHECK_FALSE(pm.phase.is_valid(3, 0));

  // -0.0 imaginary part must not produce -pi
  r.re(1, 0) = -1;
  r.im(1, 0) = -0.0;
  CHECK(phase_magnitude(r).phase.phase(1, 0) == kPi);
}

TEST_CASE("filter_image") {
  const GaborConfig config = small_config();
  SUBCASE("zero image") {
    const GrayImage img(48, 48, 0.0);
    const ComplexResponse r = filter_image(img, field_of(img), constant_frequency(48, 48, 0.1), config);
    for (std::size_t i = 0; i < r.re.size(); ++i) {
      CHECK(r.re.data()[i] == 0.0);
      CHECK(r.im.data()[i] == 0.0);
    }
  }

  const double f = 0.08, phi0 = 0.7;
  const GrayImage stripes = make(96, 64, [&](double x, double) { return 0.5 + 0.4 * std::cos(kTwoPi * f * x + phi0); });
  const OrientationField orient = field_of(stripes);
  const FrequencyMap freq = constant_frequency(96, 64, f);

  SUBCASE("phase follows vertical stripes up to a constant") {
    const PhaseMagnitude pm = phase_magnitude(filter_image(stripes, orient, freq, config));
    std::complex<double> mean{0.0, 0.0};
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 96; ++x)
        if (pm.phase.is_valid(x, y)) mean += std::polar(1.0, pm.phase.phase(x, y) - (kTwoPi * f * x + phi0));
    const double phi_c = std::arg(mean);
    // the outermost two columns see only half a kernel
    int checked = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 2; x < 94; ++x) {
        if (!pm.phase.is_valid(x, y)) continue;
        CHECK(std::abs(wrapped_diff(pm.phase.phase(x, y), kTwoPi * f * x + phi0 + phi_c)) < 0.1);
        ++checked;
      }
    CHECK(checked > 92 * 64 / 2);
  }

  SUBCASE("scaling and offset invariance") {
    const PhaseMagnitude base = phase_magnitude(filter_image(stripes, orient, freq, config));
    const GrayImage scaled = make(96, 64, [&](double x, double y) { return 0.3 * stripes(int(x), int(y)); });
    const GrayImage shifted = make(96, 64, [&](double x, double y) { return 0.3 * stripes(int(x), int(y)) + 0.2; });
    const PhaseMagnitude a = phase_magnitude(filter_image(scaled, orient, freq, config));
    const PhaseMagnitude b = phase_magnitude(filter_image(shifted, orient, freq, config));
    for (std::size_t i = 0; i < base.magnitude.size(); ++i) {
      if (!base.phase.valid.data()[i] || base.magnitude.data()[i] < 1e-6) continue;
      CHECK(a.magnitude.data()[i] == doctest::Approx(0.3 * base.magnitude.data()[i]).epsilon(1e-9));
      CHECK(std::abs(wrapped_diff(a.phase.phase.data()[i], base.phase.phase.data()[i])) < 1e-9);
      CHECK(std::abs(wrapped_diff(b.phase.phase.data()[i], base.phase.phase.data()[i])) < 1e-9);
    }
  }

  SUBCASE("flipping the patch frame conjugates the response") {
    GaborConfig left = config, right = config;
    right.normal_axis = Vec2{1.0, 0.0};
    left.normal_axis = Vec2{-1.0, 0.0};
    const ComplexResponse a = filter_image(stripes, orient, freq, right);
    const ComplexResponse b = filter_image(stripes, orient, freq, left);
    for (std::size_t i = 0; i < a.re.size(); ++i) {
      CHECK(std::abs(a.re.data()[i] - b.re.data()[i]) < 1e-9);
      CHECK(std::abs(a.im.data()[i] + b.im.data()[i]) < 1e-9);
    }
  }

  SUBCASE("stripes respond much more than a flat region") {
    const GrayImage img = make(200, 64, [&](double x, double) {
      return x < 100 ? 0.5 + 0.4 * std::cos(kTwoPi * f * x) : 0.5;
    });
    const PhaseMagnitude pm =
        phase_magnitude(filter_image(img, field_of(img), constant_frequency(200, 64, f), config));
    double on = 0.0, off = 0.0;
    int n_on = 0, n_off = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 200; ++x) {
        if (!pm.phase.is_valid(x, y)) continue;
        if (x < 60) on += pm.magnitude(x, y), ++n_on;
        if (x > 140) off += pm.magnitude(x, y), ++n_off;
      }
    REQUIRE(n_on > 0);
    REQUIRE(n_off > 0);
    CHECK(on / n_on >= 10.0 * off / n_off);
  }

  SUBCASE("pixels without a valid frequency are not seeded") {
    FrequencyMap none{ScalarField(96, 64, f), Mask(96, 64, 0)};
    const ComplexResponse r = filter_image(stripes, orient, none, config);
    for (double w : r.weight.data()) CHECK(w == 0.0);
  }
}

TEST_CASE("analyze_regions") {
  GaborConfig config = small_config();
  config.frequency_stride = 8;
  const GrayImage img = make(96, 96, [](double x, double) { return 0.5 + 0.4 * std::cos(kTwoPi * x / 12.0); });
  const OrientationField orient = field_of(img);
  SUBCASE("frequency and curvature of straight stripes") {
    const RegionAnalysis a = analyze_regions(img, orient, config);
    int valid = 0;
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x) {
        if (!a.frequency.valid(x, y)) continue;
        ++valid;
        CHECK(a.frequency.frequency(x, y) == doctest::Approx(1.0 / 12.0).epsilon(0.05));
        CHECK(a.curvature(x, y) < 0.01);
        CHECK(a.anomaly(x, y) == 0);
      }
    CHECK(valid > 96 * 96 / 2);
  }
  SUBCASE("anomaly is curvature above the threshold") {
    const Vec2 c{-20, 48};
    const GrayImage circ = make(96, 96, [&](double x, double y) {
      return 0.5 + 0.4 * std::cos(kTwoPi * norm(Vec2{x, y} - c) / 10.0);
    });
    config.curvature_threshold = 0.2;
    const RegionAnalysis a = analyze_regions(circ, field_of(circ), config);
    int flagged = 0;
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x) {
        CHECK((a.anomaly(x, y) != 0) == (a.curvature(x, y) > 0.2));
        flagged += a.anomaly(x, y) != 0;
      }
    CHECK(flagged > 0);
  }
  SUBCASE("frequency is interpolated between grid cells") {
    // a chirp: the bilinear map varies between neighbouring stride cells
    const GrayImage chirp = make(128, 64, [](double x, double) {
      return 0.5 + 0.4 * std::cos(kTwoPi * (x / 14.0 + x * x / 6000.0));
    });
    const RegionAnalysis a = analyze_regions(chirp, field_of(chirp), config);
    int steps = 0, pairs = 0;
    for (int x = 20; x + 1 < 108; ++x) {
      if (!a.frequency.valid(x, 32) || !a.frequency.valid(x + 1, 32)) continue;
      ++pairs;
      steps += a.frequency.frequency(x, 32) != a.frequency.frequency(x + 1, 32);
    }
    REQUIRE(pairs > 40);
    CHECK(steps > pairs / 2);
  }
}

TEST_CASE("refined_orientation") {
  SUBCASE("phase plane") {
    PhaseImage ph{ScalarField(40, 40), Mask(40, 40, 1)};
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) ph.phase(x, y) = wrap_angle(kTwoPi * 0.07 * y);
    const OrientationField f = refined_orientation(ph, 7, 7);
    for (int y = 5; y < 35; ++y)
      for (int x = 5; x < 35; ++x) CHECK(std::abs(f.dirs(x, y).x) > 0.9999);
  }
  SUBCASE("constant phase") {
    const PhaseImage ph{ScalarField(20, 20, 1.0), Mask(20, 20, 1)};
    const OrientationField f = refined_orientation(ph, 5, 5);
    for (double c : f.coherence.data()) CHECK(c == 0.0);
  }
  SUBCASE("circular phase") {
    const Vec2 c{50, 50};
    PhaseImage ph{ScalarField(101, 101), Mask(101, 101, 1)};
    for (int y = 0; y < 101; ++y)
      for (int x = 0; x < 101; ++x) ph.phase(x, y) = wrap_angle(kTwoPi * norm(Vec2{double(x), double(y)} - c) / 9.0);
    const OrientationField f = refined_orientation(ph, 9, 9);
    for (int y = 0; y < 101; y += 4)
      for (int x = 0; x < 101; x += 4) {
        const Vec2 d = Vec2{double(x), double(y)} - c;
        if (norm(d) < 20 || norm(d) > 45) continue;
        const double cosang = std::abs(dot(f.dirs(x, y), d)) / norm(d);
        CHECK(cosang < std::sin(2.0 * kPi / 180.0));
      }
  }
}

TEST_CASE("sample_aligned respects the reference half-plane") {
  OrientationField f{Raster<Vec2>(2, 2, Vec2{-1.0, 0.0}), ScalarField(2, 2, 1.0)};
  CHECK(f.sample_aligned({0.5, 0.5}, {1.0, 0.1}).x == doctest::Approx(1.0));
  const OrientationField none{Raster<Vec2>(2, 2, Vec2{1.0, 0.0}), ScalarField(2, 2, 0.0)};
  CHECK(none.sample_aligned({0.5, 0.5}, {0.0, 1.0}) == Vec2{0.0, 1.0});
}
