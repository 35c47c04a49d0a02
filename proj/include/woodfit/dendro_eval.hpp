#pragma once

#include <optional>
#include <string>
#include <vector>

#include "woodfit/raster.hpp"
#include "woodfit/ring_tracer.hpp"
#include "woodfit/synth.hpp"
#include "woodfit/wood_model.hpp"

namespace woodfit {

/// HSV value channel, max(R, G, B).
GrayImage hsv_value_channel(const RgbImage& img);

struct ScoreReport {
  int matches = 0;
  int misses = 0;
  int false_positives = 0;
  std::optional<double> sensitivity;  // undefined for 0 / 0
  std::optional<double> precision;
};

/// Shortest distance from p to the polyline through the ring's points.
double distance_to_ring(const RingTrace& ring, Vec2 p);

/// Greedy one-to-one matching of labels to rings in ascending distance order
/// (ties by label index, then ring index); a pair matches when its distance
/// is strictly below `threshold`.
ScoreReport score_detection(const RingSet& rings, const RingLabels& labels, double threshold = 3.0);

std::string format_score_report(const ScoreReport& report);

/// Per-ring HSL lightness averaged over the frac bins, inverted, min-max
/// normalized (all 0.5 when constant) and Gaussian smoothed with `sigma`
/// rings. Throws std::invalid_argument for fewer than two rings.
std::vector<double> latewood_series(const ColorMap& colormap, double sigma);

}  // namespace woodfit
