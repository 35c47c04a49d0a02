#include "woodfit/dendro_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "woodfit/image_ops.hpp"
#include "woodfit/text_io.hpp"

namespace woodfit {

GrayImage hsv_value_channel(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& c = img.data()[i];
    out.data()[i] = std::max({c[0], c[1], c[2]});
  }
  return out;
}

double distance_to_ring(const RingTrace& ring, Vec2 p) {
  const auto& pts = ring.points;
  if (pts.empty()) return std::numeric_limits<double>::infinity();
  double best = norm(p - pts.front());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i], ab = pts[i + 1] - pts[i];
    const double len2 = dot(ab, ab);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, norm(p - (a + ab * t)));
  }
  return best;
}

ScoreReport score_detection(const RingSet& rings, const RingLabels& labels, double threshold) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t l = 0; l < labels.size(); ++l)
    for (std::size_t r = 0; r < rings.rings.size(); ++r) {
      const double d = distance_to_ring(rings.rings[r], {labels[l].x, labels[l].y});
      if (d < threshold) pairs.emplace_back(d, l, r);
    }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> label_used(labels.size(), false), ring_used(rings.rings.size(), false);
  ScoreReport rep;
  for (const auto& [d, l, r] : pairs) {
    if (label_used[l] || ring_used[r]) continue;
    label_used[l] = ring_used[r] = true;
    ++rep.matches;
  }
  rep.misses = static_cast<int>(labels.size()) - rep.matches;
  rep.false_positives = static_cast<int>(rings.rings.size()) - rep.matches;
  if (rep.matches + rep.misses > 0)
    rep.sensitivity = static_cast<double>(rep.matches) / (rep.matches + rep.misses);
  if (rep.matches + rep.false_positives > 0)
    rep.precision = static_cast<double>(rep.matches) / (rep.matches + rep.false_positives);
  return rep;
}

std::string format_score_report(const ScoreReport& rep) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  return format_key_values({{"sensitivity", opt(rep.sensitivity)},
                            {"precision", opt(rep.precision)},
                            {"matches", std::to_string(rep.matches)},
                            {"misses", std::to_string(rep.misses)},
                            {"false_positives", std::to_string(rep.false_positives)}});
}

std::vector<double> latewood_series(const ColorMap& cmap, double sigma) {
  if (cmap.n_rings < 2) throw std::invalid_argument("latewood series needs >= 2 rings");
  std::vector<double> inv(cmap.n_rings);
  for (int k = 0; k < cmap.n_rings; ++k) {
    double sum = 0.0;
    for (int s = 0; s < cmap.samples_per_ring; ++s) {
      const Rgb& c = cmap.at(k, s);
      sum += 0.5 * (std::max({c[0], c[1], c[2]}) + std::min({c[0], c[1], c[2]}));
    }
    inv[k] = 1.0 - sum / cmap.samples_per_ring;
  }
  const auto [lo, hi] = std::minmax_element(inv.begin(), inv.end());
  const double a = *lo, b = *hi;
  for (double& v : inv) v = b > a ? (v - a) / (b - a) : 0.5;
  return gaussian_smooth_1d(inv, sigma);
}

}  // namespace woodfit
