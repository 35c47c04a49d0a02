#include "woodfit/ring_tracer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "woodfit/text_io.hpp"

namespace woodfit {

namespace {

int nearest(double v) { return static_cast<int>(std::lround(v)); }

bool usable(const PhaseImage& phase, int x, int y) {
  return phase.phase.contains(x, y) && phase.is_valid(x, y);
}

// Bilinear interpolation of wd(phi, ring_phase) over the valid corners.
std::optional<double> phase_error(const PhaseImage& phase, Vec2 p, double ring_phase) {
  const int x0 = static_cast<int>(std::floor(p.x)), y0 = static_cast<int>(std::floor(p.y));
  const double fx = p.x - x0, fy = p.y - y0;
  double acc = 0.0, wsum = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      if (w == 0.0 || !usable(phase, x0 + dx, y0 + dy)) continue;
      acc += w * wrapped_diff(phase.phase(x0 + dx, y0 + dy), ring_phase);
      wsum += w;
    }
  if (wsum < 0.25) return std::nullopt;
  return acc / wsum;
}

constexpr int kStallSteps = 32;

struct Walk {
  std::vector<Vec2> points;
  bool closed = false;
};

class Walker {
 public:
  Walker(const PhaseImage& phase, const MagnitudeImage& mag, const OrientationField& orient,
         double mag_min, const TracerConfig& cfg)
      : phase_(phase), mag_(mag), orient_(orient), mag_min_(mag_min), cfg_(cfg) {
    max_steps_ = cfg.max_steps > 0 ? cfg.max_steps : 4 * 2 * (phase.width() + phase.height());
  }

  Walk walk(Vec2 seed, Vec2 dir, bool allow_closure) const {
    Walk out;
    Vec2 pos = seed, d = dir;
    int invalid_run = 0;
    std::size_t supported_len = 0;
    bool left_start = false;
    for (int s = 0; s < max_steps_; ++s) {
      d = orient_.sample_aligned(pos, d);
      Vec2 next = pos + d * cfg_.step;
      if (!phase_.phase.contains(next)) break;
      bool supported = false;
      if (auto e = supported_error(next)) {
        const Vec2 n = perp(d);
        const double dn = dot(phase_gradient(phase_, nearest(next.x), nearest(next.y)), n);
        if (std::abs(dn) > 1e-9) {
          const Vec2 moved = next + n * std::clamp(-*e / dn, -1.0, 1.0);
          if (phase_.phase.contains(moved)) next = moved;
        }
        const auto e2 = supported_error(next);
        supported = e2 && std::abs(*e2) < 2.0 * cfg_.tol;
      }
      out.points.push_back(next);
      pos = next;
      if (supported) {
        invalid_run = 0;
        supported_len = out.points.size();
      } else if (++invalid_run > cfg_.gap_max) {
        break;
      }
      const double from_seed = norm(pos - seed);
      if (from_seed > 3.0 * cfg_.step) left_start = true;
      // Circling a point where the phase is singular (a pith): no ring.
      if (!left_start && s >= kStallSteps) {
        out.points.clear();
        return out;
      }
      if (allow_closure && left_start && from_seed < cfg_.step) {
        out.closed = true;
        break;
      }
    }
    if (!out.closed) out.points.resize(supported_len);
    return out;
  }

 private:
  std::optional<double> supported_error(Vec2 p) const {
    const int x = nearest(p.x), y = nearest(p.y);
    if (!usable(phase_, x, y) || mag_(x, y) < mag_min_) return std::nullopt;
    return phase_error(phase_, p, cfg_.ring_phase);
  }

  const PhaseImage& phase_;
  const MagnitudeImage& mag_;
  const OrientationField& orient_;
  double mag_min_;
  const TracerConfig& cfg_;
  int max_steps_ = 0;
};

struct PointGrid {
  double cell;
  std::unordered_map<long long, std::vector<Vec2>> buckets;

  static long long key(long long cx, long long cy) { return (cx << 32) ^ (cy & 0xffffffffLL); }

  PointGrid(const std::vector<Vec2>& pts, double cell_size) : cell(cell_size) {
    for (const Vec2& p : pts)
      buckets[key(static_cast<long long>(std::floor(p.x / cell)),
                  static_cast<long long>(std::floor(p.y / cell)))]
          .push_back(p);
  }

  double nearest_distance(Vec2 p, double cap) const {
    const auto cx = static_cast<long long>(std::floor(p.x / cell));
    const auto cy = static_cast<long long>(std::floor(p.y / cell));
    double best = cap;
    for (long long dy = -1; dy <= 1; ++dy)
      for (long long dx = -1; dx <= 1; ++dx) {
        const auto it = buckets.find(key(cx + dx, cy + dy));
        if (it == buckets.end()) continue;
        for (const Vec2& q : it->second) best = std::min(best, norm(p - q));
      }
    return best;
  }
};

double median_inplace(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

Vec2 phase_gradient(const PhaseImage& phase, int x, int y) {
  auto axis = [&](int dx, int dy) {
    const bool fwd = usable(phase, x + dx, y + dy), back = usable(phase, x - dx, y - dy);
    const bool mid = usable(phase, x, y);
    if (fwd && back)
      return 0.5 * wrapped_diff(phase.phase(x + dx, y + dy), phase.phase(x - dx, y - dy));
    if (fwd && mid) return wrapped_diff(phase.phase(x + dx, y + dy), phase.phase(x, y));
    if (back && mid) return wrapped_diff(phase.phase(x, y), phase.phase(x - dx, y - dy));
    return 0.0;
  };
  return {axis(1, 0), axis(0, 1)};
}

double magnitude_threshold(const PhaseImage& phase, const MagnitudeImage& magnitude,
                           double fraction) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    if (!phase.valid.data()[i]) continue;
    sum += magnitude.data()[i];
    ++n;
  }
  return n ? fraction * sum / n : 0.0;
}

std::vector<Seed> find_seeds(const PhaseImage& phase, const MagnitudeImage& magnitude, double tol,
                             double mag_min, double ring_phase) {
  if (!(tol > 0.0)) throw std::invalid_argument("find_seeds: tol must be positive");
  std::vector<Seed> seeds;
  for (int y = 0; y < phase.height(); ++y)
    for (int x = 0; x < phase.width(); ++x) {
      if (!phase.is_valid(x, y) || magnitude(x, y) < mag_min) continue;
      const double e = wrapped_diff(phase.phase(x, y), ring_phase);
      if (std::abs(e) >= tol) continue;
      Vec2 pos{double(x), double(y)};
      const Vec2 g = phase_gradient(phase, x, y);
      const double g2 = dot(g, g);
      if (g2 > 1e-12) {
        Vec2 delta = g * (-e / g2);
        const double len = norm(delta);
        if (len > 1.0) delta = delta * (1.0 / len);
        if (phase.phase.contains(pos + delta)) pos += delta;
      }
      seeds.push_back({pos, magnitude(x, y)});
    }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [](const Seed& a, const Seed& b) { return a.magnitude > b.magnitude; });
  return seeds;
}

RingTrace trace_ring(const PhaseImage& phase, const MagnitudeImage& magnitude,
                     const OrientationField& orient, Vec2 seed, double mag_min,
                     const TracerConfig& config) {
  if (!phase.phase.contains(seed) || !usable(phase, nearest(seed.x), nearest(seed.y)))
    throw std::invalid_argument("trace_ring: seed outside the valid phase region");
  const Walker walker(phase, magnitude, orient, mag_min, config);
  const Vec2 d0 = orient.sample_aligned(
      seed, orient.dirs.clamped(nearest(seed.x), nearest(seed.y)));

  RingTrace trace;
  trace.seed_magnitude = magnitude(nearest(seed.x), nearest(seed.y));
  const Walk fwd = walker.walk(seed, d0, true);
  if (fwd.closed) {
    trace.points.push_back(seed);
    trace.points.insert(trace.points.end(), fwd.points.begin(), fwd.points.end());
    trace.closed = true;
    return trace;
  }
  const Walk back = walker.walk(seed, -d0, false);
  trace.points.assign(back.points.rbegin(), back.points.rend());
  trace.points.push_back(seed);
  trace.points.insert(trace.points.end(), fwd.points.begin(), fwd.points.end());
  return trace;
}

double directed_median_distance(const RingTrace& a, const RingTrace& b, double cap) {
  if (a.points.empty() || b.points.empty()) return cap;
  const PointGrid grid(b.points, std::max(cap, 1.0));
  std::vector<double> d;
  d.reserve(a.points.size());
  for (const Vec2& p : a.points) d.push_back(grid.nearest_distance(p, cap));
  return median_inplace(d);
}

double reference_position(const RingTrace& trace, double row) {
  const auto& pts = trace.points;
  if (pts.empty()) return 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i].y - row, b = pts[i + 1].y - row;
    if (a == 0.0) return pts[i].x;
    if ((a < 0.0) != (b < 0.0)) {
      const double t = a / (a - b);
      return pts[i].x + t * (pts[i + 1].x - pts[i].x);
    }
  }
  if (pts.back().y == row) return pts.back().x;
  const auto it = std::min_element(pts.begin(), pts.end(), [&](Vec2 p, Vec2 q) {
    return std::abs(p.y - row) < std::abs(q.y - row);
  });
  return it->x;
}

RingSet dedup_rings(std::vector<RingTrace> traces, double min_separation, double reference_row) {
  std::stable_sort(traces.begin(), traces.end(), [](const RingTrace& a, const RingTrace& b) {
    if (a.points.size() != b.points.size()) return a.points.size() > b.points.size();
    return a.seed_magnitude > b.seed_magnitude;
  });
  const double cap = 2.0 * min_separation;
  RingSet out;
  for (auto& t : traces) {
    bool duplicate = false;
    for (const auto& kept : out.rings) {
      const double d = std::min(directed_median_distance(t, kept, cap),
                                directed_median_distance(kept, t, cap));
      if (d < min_separation) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.rings.push_back(std::move(t));
  }
  std::stable_sort(out.rings.begin(), out.rings.end(),
                   [&](const RingTrace& a, const RingTrace& b) {
                     return reference_position(a, reference_row) <
                            reference_position(b, reference_row);
                   });
  return out;
}

RingSet trace_all(const PhaseImage& phase, const MagnitudeImage& magnitude,
                  const OrientationField& orient, const TracerConfig& config) {
  const double mag_min = magnitude_threshold(phase, magnitude, config.mag_min_fraction);
  const auto seeds = find_seeds(phase, magnitude, config.tol, mag_min, config.ring_phase);
  Mask occupied(phase.width(), phase.height());
  const int radius = std::max(1, static_cast<int>(std::ceil(config.min_separation / 2.0)));

  std::vector<RingTrace> traces;
  for (const Seed& s : seeds) {
    const int sx = nearest(s.position.x), sy = nearest(s.position.y);
    if (occupied(sx, sy) || !usable(phase, sx, sy)) continue;
    RingTrace t = trace_ring(phase, magnitude, orient, s.position, mag_min, config);
    for (const Vec2& p : t.points) {
      const int px = nearest(p.x), py = nearest(p.y);
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          if (occupied.contains(px + dx, py + dy)) occupied(px + dx, py + dy) = 1;
    }
    if (static_cast<int>(t.points.size()) >= config.min_points) traces.push_back(std::move(t));
  }
  const double row = config.reference_row < 0.0 ? phase.height() / 2 : config.reference_row;
  return dedup_rings(std::move(traces), config.min_separation, row);
}

std::string format_ring_set(const RingSet& rings) {
  std::string out = "ring_id,point_index,x,y\n";
  for (std::size_t r = 0; r < rings.rings.size(); ++r) {
    const auto& pts = rings.rings[r].points;
    for (std::size_t i = 0; i < pts.size(); ++i)
      out += std::to_string(r) + "," + std::to_string(i) + "," + format_fixed(pts[i].x, 4) + "," +
             format_fixed(pts[i].y, 4) + "\n";
  }
  return out;
}

RingSet parse_ring_set(std::string_view text) {
  RingSet out;
  std::istringstream in{std::string(text)};
  std::string line;
  long current = -1;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#' || t.starts_with("ring_id")) continue;
    const auto f = split_fields(t, ',');
    if (f.size() != 4) throw FormatError("rings: expected ring_id,point_index,x,y");
    const long id = parse_int(f[0], "ring_id");
    const long idx = parse_int(f[1], "point_index");
    if (id != current) {
      if (id != current + 1) throw FormatError("rings: ring ids must be consecutive from 0");
      out.rings.emplace_back();
      current = id;
    }
    if (idx != static_cast<long>(out.rings.back().points.size()))
      throw FormatError("rings: point indices must be consecutive from 0");
    out.rings.back().points.push_back({parse_double(f[2], "x"), parse_double(f[3], "y")});
  }
  return out;
}

RingSet read_ring_set(const std::filesystem::path& path) {
  return parse_ring_set(read_text_file(path));
}

void write_ring_set(const std::filesystem::path& path, const RingSet& rings) {
  write_text_file(path, format_ring_set(rings));
}

}  // namespace woodfit
