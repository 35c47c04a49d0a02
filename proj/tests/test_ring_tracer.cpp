#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "woodfit/curved_gabor.hpp"
#include "woodfit/dendro_eval.hpp"
#include "woodfit/ring_tracer.hpp"

using namespace woodfit;

namespace {

PhaseImage phase_of_field(int w, int h, auto f) {
  PhaseImage p{ScalarField(w, h), Mask(w, h, 1)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) p.phase(x, y) = wrap_angle(f(double(x), double(y)));
  return p;
}

struct Scene {
  PhaseImage phase;
  MagnitudeImage magnitude;
  OrientationField orient;
};

Scene scene(PhaseImage phase) {
  Scene s{phase, ScalarField(phase.width(), phase.height(), 1.0), {}};
  s.orient = refined_orientation(phase, 7, 7);
  return s;
}

// Rings (phase pi/2) at y = 50 + 20 k.
Scene horizontal(int w = 120, int h = 100) {
  return scene(phase_of_field(w, h, [](double, double y) { return kTwoPi * (y - 50.0) / 20.0 + kPi / 2; }));
}

// Rings at radius 80 + 20 k around (120, 120).
Scene circles() {
  return scene(phase_of_field(240, 240, [](double x, double y) {
    return kTwoPi * (std::hypot(x - 120.0, y - 120.0) - 80.0) / 20.0 + kPi / 2;
  }));
}

// Largest distance from a point of `a` to the polyline of `b`.
double directed_hausdorff(const RingTrace& a, const RingTrace& b) {
  double worst = 0.0;
  for (const Vec2& p : a.points) worst = std::max(worst, distance_to_ring(b, p));
  return worst;
}

}  // namespace

TEST_CASE("find_seeds") {
  SUBCASE("constant pi/2") {
    const PhaseImage p{ScalarField(6, 5, kPi / 2), Mask(6, 5, 1)};
    CHECK(find_seeds(p, ScalarField(6, 5, 1.0), 0.2, 0.5).size() == 30);
  }
  SUBCASE("constant 0") {
    const PhaseImage p{ScalarField(6, 5, 0.0), Mask(6, 5, 1)};
    CHECK(find_seeds(p, ScalarField(6, 5, 1.0), 0.2, 0.5).empty());
  }
  SUBCASE("ramp seeds sit on the level rows") {
    const PhaseImage p = phase_of_field(20, 60, [](double, double y) { return kTwoPi * y / 20.0; });
    const auto seeds = find_seeds(p, ScalarField(20, 60, 1.0), 0.2, 0.5);
    REQUIRE_FALSE(seeds.empty());
    for (const Seed& s : seeds) {
      const double m = std::fmod(s.position.y, 20.0);
      CHECK(std::abs(m - 5.0) <= 0.25);
    }
  }
  SUBCASE("magnitude gate and ordering") {
    const PhaseImage p{ScalarField(3, 1, kPi / 2), Mask(3, 1, 1)};
    ScalarField mag(3, 1);
    mag(0, 0) = 0.1;
    mag(1, 0) = 2.0;
    mag(2, 0) = 1.0;
    const auto seeds = find_seeds(p, mag, 0.2, 0.5);
    REQUIRE(seeds.size() == 2);
    CHECK(seeds[0].magnitude == 2.0);
    CHECK(seeds[1].magnitude == 1.0);
  }
  SUBCASE("invalid pixels are skipped") {
    PhaseImage p{ScalarField(3, 1, kPi / 2), Mask(3, 1, 1)};
    p.valid(1, 0) = 0;
    CHECK(find_seeds(p, ScalarField(3, 1, 1.0), 0.2, 0.5).size() == 2);
  }
}

TEST_CASE("magnitude threshold and phase gradient") {
  PhaseImage p = phase_of_field(5, 5, [](double x, double) { return 3.0 + 0.5 * x; });
  p.valid(0, 0) = 0;
  ScalarField mag(5, 5, 2.0);
  mag(0, 0) = 1000.0;
  CHECK(magnitude_threshold(p, mag, 0.05) == doctest::Approx(0.1));
  // the wrap between x = 0 and x = 1 must not show up in the gradient
  const Vec2 g = phase_gradient(p, 2, 2);
  CHECK(g.x == doctest::Approx(0.5));
  CHECK(g.y == doctest::Approx(0.0));
}

TEST_CASE("trace_ring") {
  TracerConfig config;
  SUBCASE("straight ring spans the image") {
    const Scene s = horizontal();
    const RingTrace t = trace_ring(s.phase, s.magnitude, s.orient, {30.0, 50.0}, 0.05, config);
    REQUIRE(t.points.size() > 100);
    double min_x = 1e9, max_x = -1e9, max_dev = 0.0;
    for (const Vec2& p : t.points) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      max_dev = std::max(max_dev, std::abs(p.y - 50.0));
    }
    CHECK(min_x <= 1.0);
    CHECK(max_x >= 118.0);
    CHECK(max_dev < 0.5);
    CHECK_FALSE(t.closed);
    for (std::size_t i = 1; i < t.points.size(); ++i)
      CHECK(norm(t.points[i] - t.points[i - 1]) <= config.step + 0.01);
  }
  SUBCASE("circle closes") {
    const Scene s = circles();
    const RingTrace t = trace_ring(s.phase, s.magnitude, s.orient, {200.0, 120.0}, 0.05, config);
    CHECK(t.closed);
    double se = 0.0;
    for (const Vec2& p : t.points) {
      const double e = std::hypot(p.x - 120.0, p.y - 120.0) - 80.0;
      se += e * e;
      CHECK(std::abs(wrapped_diff(sample_bilinear(s.phase.phase, p), kPi / 2)) < 2 * config.tol);
    }
    CHECK(std::sqrt(se / t.points.size()) < 0.5);
    CHECK(t.points.size() > 450);

    const RingTrace u = trace_ring(s.phase, s.magnitude, s.orient, {40.0, 120.0}, 0.05, config);
    CHECK(directed_hausdorff(t, u) < 0.25);
    CHECK(directed_hausdorff(u, t) < 0.25);
  }
  SUBCASE("crosses a short gap") {
    Scene s = horizontal();
    for (int y = 0; y < 100; ++y)
      for (int x = 60; x < 65; ++x) {
        s.phase.valid(x, y) = 0;
        s.magnitude(x, y) = 0.0;
      }
    config.gap_max = 8;
    const RingTrace t = trace_ring(s.phase, s.magnitude, s.orient, {30.0, 50.0}, 0.05, config);
    double min_x = 1e9, max_x = -1e9;
    for (const Vec2& p : t.points) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      CHECK(std::abs(p.y - 50.0) < 0.5);
    }
    CHECK(min_x <= 1.0);
    CHECK(max_x >= 118.0);
  }
  SUBCASE("stops at a long gap") {
    Scene s = horizontal();
    for (int y = 0; y < 100; ++y)
      for (int x = 60; x < 80; ++x) s.magnitude(x, y) = 0.0;
    config.gap_max = 8;
    const RingTrace t = trace_ring(s.phase, s.magnitude, s.orient, {30.0, 50.0}, 0.05, config);
    double max_x = -1e9;
    for (const Vec2& p : t.points) max_x = std::max(max_x, p.x);
    CHECK(max_x < 80.0);
  }
  SUBCASE("invalid seed") {
    Scene s = horizontal();
    s.phase.valid(30, 50) = 0;
    CHECK_THROWS_AS(trace_ring(s.phase, s.magnitude, s.orient, {30.0, 50.0}, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(trace_ring(s.phase, s.magnitude, s.orient, {-3.0, 50.0}, 0.05), std::invalid_argument);
  }
}

TEST_CASE("dedup_rings") {
  RingTrace a, b, c;
  for (int i = 0; i < 50; ++i) {
    a.points.push_back({10.0 + 0.1 * i, double(i)});
    c.points.push_back({40.0, double(i)});
  }
  b = a;
  SUBCASE("identical traces") { CHECK(dedup_rings({a, b}, 4.0, 25.0).rings.size() == 1); }
  SUBCASE("distant traces are kept and sorted") {
    const RingSet r = dedup_rings({c, a}, 4.0, 25.0);
    REQUIRE(r.rings.size() == 2);
    CHECK(r.rings[0].points[0].x == 10.0);
    CHECK(reference_position(r.rings[0], 25.0) == doctest::Approx(12.5));
  }
  SUBCASE("the longest trace of a group survives") {
    RingTrace shorter;
    shorter.points.assign(a.points.begin(), a.points.begin() + 20);
    shorter.seed_magnitude = 10.0;
    const RingSet r = dedup_rings({shorter, a}, 4.0, 25.0);
    REQUIRE(r.rings.size() == 1);
    CHECK(r.rings[0].points.size() == 50);
  }
  SUBCASE("equal length ties go to the stronger seed") {
    RingTrace weak = a, strong = a;
    strong.points[0].x += 0.01;
    strong.seed_magnitude = 2.0;
    weak.seed_magnitude = 1.0;
    const RingSet r1 = dedup_rings({weak, strong}, 4.0, 25.0);
    const RingSet r2 = dedup_rings({strong, weak}, 4.0, 25.0);
    REQUIRE(r1.rings.size() == 1);
    CHECK(r1.rings[0].seed_magnitude == 2.0);
    CHECK(r2.rings[0].seed_magnitude == 2.0);
  }
  SUBCASE("many seeds on one circle") {
    const Scene s = circles();
    std::vector<RingTrace> traces;
    for (int k = 0; k < 12; ++k) {
      const double a = kTwoPi * k / 12.0;
      traces.push_back(trace_ring(s.phase, s.magnitude, s.orient,
                                  {120.0 + 80.0 * std::cos(a), 120.0 + 80.0 * std::sin(a)}, 0.05));
    }
    CHECK(dedup_rings(traces, 4.0, 120.0).rings.size() == 1);
  }
}

TEST_CASE("trace_all") {
  SUBCASE("stripes") {
    const Scene s = horizontal();
    TracerConfig config;
    const RingSet r = trace_all(s.phase, s.magnitude, s.orient, config);
    // rings at y = 10, 30, 50, 70, 90
    REQUIRE(r.rings.size() == 5);
  }
  SUBCASE("circles") {
    const Scene s = circles();
    const RingSet r = trace_all(s.phase, s.magnitude, s.orient);
    // radii 20 .. 100 fit inside the 240 x 240 image as closed rings; radius
    // 120 touches all four sides and 140, 160 cross the corners, leaving four
    // arcs each. The singular center (phase pi/2 at r = 0) yields no ring.
    int closed = 0;
    for (const RingTrace& t : r.rings) {
      closed += t.closed;
      double r_min = 1e9, r_max = 0.0;
      for (const Vec2& p : t.points) {
        const double rr = std::hypot(p.x - 120.0, p.y - 120.0);
        r_min = std::min(r_min, rr);
        r_max = std::max(r_max, rr);
      }
      CHECK(r_min > 19.0);
      CHECK(r_max - r_min < 1.0);
    }
    CHECK(closed == 5);
    CHECK(r.rings.size() == 5 + 3 * 4);
  }
  SUBCASE("independent of the worker count") {
    const Scene s = circles();
    const RingSet a = trace_all(s.phase, s.magnitude, s.orient);
    CHECK(format_ring_set(a) == format_ring_set(trace_all(s.phase, s.magnitude, s.orient)));
  }
}

TEST_CASE("ring set csv") {
  RingSet r;
  r.rings.push_back({{{1.23456, 2.0}, {3.0, 4.5}}, false, 1.0});
  r.rings.push_back({{{7.0, 8.0}}, false, 1.0});
  const std::string text = format_ring_set(r);
  CHECK(text.rfind("ring_id,point_index,x,y\n", 0) == 0);
  CHECK(text.find("0,0,1.2346,2.0000") != std::string::npos);
  const RingSet back = parse_ring_set(text);
  REQUIRE(back.rings.size() == 2);
  CHECK(back.rings[0].points[0].x == doctest::Approx(1.2346));
  CHECK(back.rings[1].points.size() == 1);
  CHECK_THROWS(parse_ring_set("ring_id,point_index,x,y\n0,0,abc,1\n"));
}
