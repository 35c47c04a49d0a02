#include "woodfit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "woodfit/text_io.hpp"

namespace woodfit {

namespace {

double max_ring_coordinate(const WoodModelParams& params, int width, int height) {
  double best = 0.0;
  for (double u : {0.0, double(width - 1)})
    for (int v = 0; v < height; ++v) best = std::max(best, ring_coordinate(params, u, v));
  return best;
}

ColorMap synth_colormap(const SynthSpec& spec, int n_rings) {
  ColorMap cmap(n_rings, spec.samples_per_ring);
  cmap.lookup = spec.lookup;
  for (int s = 0; s < spec.samples_per_ring; ++s) {
    const double center = (s + 0.5) / spec.samples_per_ring;
    double value = 0.0;
    if (spec.colormap == ColormapKind::ramp)
      value = spec.ramp_low + (spec.ramp_high - spec.ramp_low) * center;
    else
      value = center < spec.two_tone_threshold ? spec.latewood : spec.earlywood;
    for (int k = 0; k < n_rings; ++k) cmap.at(k, s) = {value, value, value};
  }
  return cmap;
}

}  // namespace

void validate(const SynthSpec& spec) {
  const auto& p = spec.pose;
  if (spec.width < 3 || spec.height < 3) throw std::invalid_argument("synth: image too small");
  if (!(p.scale > 0.0) || !(p.s_r > 0.0) || !(p.x_offset >= 0.0))
    throw std::invalid_argument("synth: need scale > 0, s_r > 0, x_offset >= 0");
  if (spec.samples_per_ring < 1 || spec.texture_size < 2)
    throw std::invalid_argument("synth: bad colormap or texture resolution");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("synth: negative noise");
  const double limit = 0.45 * p.s_r;
  if (spec.distortion == DistortionKind::constant && !(std::abs(spec.constant) < limit))
    throw std::invalid_argument("synth: constant distortion must stay below 0.45 s_r");
  if (spec.distortion == DistortionKind::sinusoid && !(std::abs(spec.amplitude) < limit))
    throw std::invalid_argument("synth: amplitude must stay below 0.45 s_r");
}

WoodModelParams synth_params(const SynthSpec& spec) {
  validate(spec);
  WoodModelParams params;
  params.pose = spec.pose;
  params.distortion = footprint_texture(spec.pose, spec.width, spec.height, spec.texture_size,
                                        spec.texture_size);
  auto& tex = params.distortion;
  for (int i = 0; i < tex.rows; ++i) {
    const double r = i * tex.r_step();
    for (int j = 0; j < tex.cols; ++j) {
      const double z = j * tex.z_step();
      double m = 0.0;
      if (spec.distortion == DistortionKind::constant) {
        m = spec.constant;
      } else if (spec.distortion == DistortionKind::sinusoid) {
        m = spec.amplitude * std::sin(kTwoPi * spec.periods_z * z / tex.z_max + spec.phase_z) *
            std::cos(kTwoPi * spec.periods_r * r / tex.r_max);
      }
      tex.at(i, j) = m;
    }
  }
  if (has_fold_over(tex)) throw std::invalid_argument("synth: distortion folds rings over");
  const double u_max = max_ring_coordinate(params, spec.width, spec.height);
  params.colormap = synth_colormap(spec, static_cast<int>(std::ceil(u_max)) + 2);
  return params;
}

RingLabels scanline_labels(const WoodModelParams& params, int width, double v) {
  RingLabels out;
  auto ring_at = [&](double u) { return ring_coordinate(params, u, v); };
  double prev = ring_at(0.0);
  for (int x = 1; x < width; ++x) {
    const double cur = ring_at(x);
    const double k_prev = std::floor(prev), k_cur = std::floor(cur);
    if (k_prev != k_cur) {
      // Integer crossed between x - 1 and x; find U(u) = k by bisection.
      const double k = std::max(k_prev, k_cur);
      double lo = x - 1.0, hi = x;
      const bool rising = cur > prev;
      while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        const bool above = ring_at(mid) >= k;
        if (above == rising) hi = mid;
        else lo = mid;
      }
      out.push_back({0.5 * (lo + hi), v});
    }
    prev = cur;
  }
  return out;
}

SynthSpec detection_benchmark() {
  SynthSpec s;
  s.width = s.height = 512;
  s.pose = {256.0, 2.5 * 31.5, 1.0, 31.5, 0.0, true, false};
  s.distortion = DistortionKind::sinusoid;
  s.amplitude = 0.3 * 31.5;
  s.noise_sigma = 0.02;
  return s;
}

SynthSpec fit_benchmark() {
  SynthSpec s = detection_benchmark();
  s.width = s.height = 256;
  s.pose = {128.0, 2.5 * 15.75, 1.0, 15.75, 0.0, true, false};
  s.amplitude = 0.3 * 15.75;
  return s;
}

SynthOutput generate(const SynthSpec& spec) {
  SynthOutput out;
  out.params = synth_params(spec);
  out.distortion = out.params.distortion;
  out.phase = render_phase(out.params, spec.width, spec.height);
  out.rgb = render_color(out.params, spec.width, spec.height);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  out.gray = GrayImage(spec.width, spec.height);
  for (std::size_t i = 0; i < out.rgb.size(); ++i) {
    const double n = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0;
    Rgb& c = out.rgb.data()[i];
    for (double& ch : c) ch = std::clamp(ch + n, 0.0, 1.0);
    out.gray.data()[i] = std::max({c[0], c[1], c[2]});
  }
  const double row = spec.label_row < 0.0 ? spec.height / 2 : spec.label_row;
  out.labels = scanline_labels(out.params, spec.width, row);
  return out;
}

namespace {

std::string distortion_name(DistortionKind k) {
  switch (k) {
    case DistortionKind::zero: return "zero";
    case DistortionKind::constant: return "constant";
    case DistortionKind::sinusoid: return "sinusoid";
  }
  return "zero";
}

}  // namespace

void apply_synth_setting(SynthSpec& spec, const std::string& key, const std::string& value) {
  auto num = [&] { return parse_double(value, key); };
  auto integer = [&] { return static_cast<int>(parse_int(value, key)); };
  if (key == "width") spec.width = integer();
  else if (key == "height") spec.height = integer();
  else if (key == "u_center") spec.pose.u_center = num();
  else if (key == "x_offset") spec.pose.x_offset = num();
  else if (key == "scale") spec.pose.scale = num();
  else if (key == "s_r") spec.pose.s_r = num();
  else if (key == "z_origin") spec.pose.z_origin = num();
  else if (key == "distortion") {
    if (value == "zero") spec.distortion = DistortionKind::zero;
    else if (value == "constant") spec.distortion = DistortionKind::constant;
    else if (value == "sinusoid") spec.distortion = DistortionKind::sinusoid;
    else throw FormatError("distortion: expected zero, constant or sinusoid");
  } else if (key == "distortion_constant") spec.constant = num();
  else if (key == "distortion_amplitude") spec.amplitude = num();
  else if (key == "distortion_periods_r") spec.periods_r = num();
  else if (key == "distortion_periods_z") spec.periods_z = num();
  else if (key == "distortion_phase_z") spec.phase_z = num();
  else if (key == "colormap") {
    if (value == "ramp") spec.colormap = ColormapKind::ramp;
    else if (value == "two_tone") spec.colormap = ColormapKind::two_tone;
    else throw FormatError("colormap: expected ramp or two_tone");
  } else if (key == "ramp_low") spec.ramp_low = num();
  else if (key == "ramp_high") spec.ramp_high = num();
  else if (key == "two_tone_threshold") spec.two_tone_threshold = num();
  else if (key == "earlywood") spec.earlywood = num();
  else if (key == "latewood") spec.latewood = num();
  else if (key == "samples_per_ring") spec.samples_per_ring = integer();
  else if (key == "color_lookup") {
    if (value == "linear") spec.lookup = ColorLookup::linear;
    else if (value == "nearest") spec.lookup = ColorLookup::nearest;
    else throw FormatError("color_lookup: expected linear or nearest");
  } else if (key == "noise_sigma") spec.noise_sigma = num();
  else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "texture_size") spec.texture_size = integer();
  else if (key == "label_row") spec.label_row = num();
  else throw FormatError("synth spec: unknown key '" + key + "'");
}

SynthSpec parse_synth_spec(std::string_view text, SynthSpec base) {
  for (const auto& [key, value] : parse_key_values(text)) apply_synth_setting(base, key, value);
  validate(base);
  return base;
}

std::string format_synth_spec(const SynthSpec& spec) {
  KeyValueList kv{
      {"width", std::to_string(spec.width)},
      {"height", std::to_string(spec.height)},
      {"u_center", format_double(spec.pose.u_center)},
      {"x_offset", format_double(spec.pose.x_offset)},
      {"scale", format_double(spec.pose.scale)},
      {"s_r", format_double(spec.pose.s_r)},
      {"z_origin", format_double(spec.pose.z_origin)},
      {"distortion", distortion_name(spec.distortion)},
      {"distortion_constant", format_double(spec.constant)},
      {"distortion_amplitude", format_double(spec.amplitude)},
      {"distortion_periods_r", format_double(spec.periods_r)},
      {"distortion_periods_z", format_double(spec.periods_z)},
      {"distortion_phase_z", format_double(spec.phase_z)},
      {"colormap", spec.colormap == ColormapKind::ramp ? "ramp" : "two_tone"},
      {"ramp_low", format_double(spec.ramp_low)},
      {"ramp_high", format_double(spec.ramp_high)},
      {"two_tone_threshold", format_double(spec.two_tone_threshold)},
      {"earlywood", format_double(spec.earlywood)},
      {"latewood", format_double(spec.latewood)},
      {"samples_per_ring", std::to_string(spec.samples_per_ring)},
      {"color_lookup", spec.lookup == ColorLookup::linear ? "linear" : "nearest"},
      {"noise_sigma", format_double(spec.noise_sigma)},
      {"seed", std::to_string(spec.seed)},
      {"texture_size", std::to_string(spec.texture_size)},
      {"label_row", format_double(spec.label_row)},
  };
  return format_key_values(kv);
}

std::string format_labels(const RingLabels& labels) {
  std::string out = "x,y\n";
  for (const auto& l : labels) out += format_fixed(l.x, 4) + "," + format_fixed(l.y, 4) + "\n";
  return out;
}

RingLabels parse_labels(std::string_view text) {
  RingLabels out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = split_fields(t, ',');
    if (first && f.size() >= 1 && f[0] == "x") {
      first = false;
      continue;
    }
    first = false;
    if (f.size() != 2) throw FormatError("labels: expected 'x,y'");
    out.push_back({parse_double(f[0], "label x"), parse_double(f[1], "label y")});
  }
  return out;
}

RingLabels read_labels(const std::filesystem::path& path) {
  return parse_labels(read_text_file(path));
}

void write_labels(const std::filesystem::path& path, const RingLabels& labels) {
  write_text_file(path, format_labels(labels));
}

}  // namespace woodfit
