#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "woodfit/board_pose.hpp"
#include "woodfit/phase.hpp"
#include "woodfit/wood_model.hpp"

namespace woodfit {

enum class DistortionKind { zero, constant, sinusoid };
enum class ColormapKind { ramp, two_tone };

/// Synthetic tangential cut. The sinusoid field is
///   m_r(r, z) = a sin(2 pi pz z / z_max + psi) cos(2 pi pr r / r_max)
/// over the ground-truth texture extents.
struct SynthSpec {
  int width = 256;
  int height = 256;
  BoardPose pose{128.0, 40.0, 1.0, 16.0, 0.0, true, false};

  DistortionKind distortion = DistortionKind::zero;
  double constant = 0.0;
  double amplitude = 0.0;
  double periods_r = 1.0;
  double periods_z = 1.0;
  double phase_z = 0.0;

  ColormapKind colormap = ColormapKind::ramp;
  double ramp_low = 0.2;
  double ramp_high = 0.8;
  double two_tone_threshold = 0.5;
  double earlywood = 0.8;
  double latewood = 0.3;
  int samples_per_ring = 32;
  ColorLookup lookup = ColorLookup::linear;

  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  int texture_size = 512;
  double label_row = -1.0;  // scanline for labels; negative selects height / 2
};

struct RingLabel {
  double x = 0.0;
  double y = 0.0;
};
using RingLabels = std::vector<RingLabel>;

struct SynthOutput {
  WoodModelParams params;
  RgbImage rgb;
  GrayImage gray;
  PhaseImage phase;
  RingLabels labels;
  DistortionTexture distortion;
};

/// Throws std::invalid_argument for specs that could fold rings over.
void validate(const SynthSpec& spec);

/// Model parameters of a spec (texture sampled from the analytic field).
WoodModelParams synth_params(const SynthSpec& spec);

SynthOutput generate(const SynthSpec& spec);

/// 512 x 512 tangential cut with 12 ring crossings on the middle row, axis in
/// the image centre, x_offset = 2.5 s_r, sinusoidal distortion of amplitude
/// 0.3 s_r and noise sigma 0.02.
SynthSpec detection_benchmark();
/// The same board at half resolution (256 x 256).
SynthSpec fit_benchmark();

/// Scanline crossings of integer ring coordinates, bisected to 1e-3 px.
RingLabels scanline_labels(const WoodModelParams& params, int width, double v);

std::string format_synth_spec(const SynthSpec& spec);
/// Applies key-value overrides on top of `base`; unknown keys are rejected.
SynthSpec parse_synth_spec(std::string_view text, SynthSpec base = {});
void apply_synth_setting(SynthSpec& spec, const std::string& key, const std::string& value);

std::string format_labels(const RingLabels& labels);
RingLabels parse_labels(std::string_view text);
RingLabels read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const RingLabels& labels);

}  // namespace woodfit
