#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "woodfit/board_locator.hpp"
#include "woodfit/curved_gabor.hpp"
#include "woodfit/fit_engine.hpp"
#include "woodfit/image_ops.hpp"
#include "woodfit/ring_tracer.hpp"
#include "woodfit/synth.hpp"
#include "woodfit/wood_model.hpp"

namespace woodfit {

/// Every tunable of the pipeline. Parsed from a flat key-value file; keys are
/// listed by `config_keys()`.
struct PipelineConfig {
  double smooth_sigma = 1.0;
  int orientation_window_w = 15;
  int orientation_window_h = 15;
  int refined_window_w = 15;
  int refined_window_h = 15;
  GaborConfig gabor;
  TracerConfig tracer;
  PoseGrid pose;
  FitConfig fit;
  int colormap_samples = 16;
  ColorLookup color_lookup = ColorLookup::linear;
  double eval_threshold = 3.0;
  int resize_width = 0;  // 0 keeps the input width
};

std::vector<std::string> config_keys();
/// Throws FormatError for unknown keys or malformed values.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
std::string format_config(const PipelineConfig& config);
/// Throws std::invalid_argument naming the first offending key.
void validate(const PipelineConfig& config);

/// Bilinear resampling to `width` (height scaled to keep the aspect ratio).
GrayImage resize_to_width(const GrayImage& img, int width);
RgbImage resize_to_width(const RgbImage& img, int width);

struct Detection {
  PhaseMagnitude raw;
  OrientationField orientation;  // refined field used for tracing
  RingSet raw_rings;             // traced on the unresolved phase
  std::optional<BoardPose> center;  // pose estimate from raw_rings
  PhaseImage phase;              // sign-resolved when a center was found
  RingSet rings;                 // traced on `phase`
  bool center_outside_image = false;
  std::vector<std::string> warnings;
};

/// Orientation, curved Gabor filtering and two-pass ring tracing: rings are
/// traced on the raw phase, the tree axis is located from them, the phase is
/// sign-resolved and the rings are traced again.
Detection detect(const GrayImage& gray, const PipelineConfig& config);

struct FitOutputs {
  Detection detection;
  BoardPose pose;
  PhaseImage reference;  // sign-resolved with the located pose, rings at phase 0
  Mask mask;
  WoodModelParams initial;
  WoodModelParams fitted;
  FitReport report;
};

/// detect -> locate -> initial guess -> sign resolution -> Adam fit ->
/// colormap extraction. Throws InsufficientDataError for too few rings.
FitOutputs run_fit(const RgbImage& image, const PipelineConfig& config);

/// Number of colormap rings needed to cover the image.
int rings_covering(const WoodModelParams& params, int width, int height);

/// Writes the artifacts of run_fit into `dir`:
/// pose.txt, distortion.txt, colormap.csv, fit_report.csv, fit_summary.txt, rings.csv.
void write_fit_outputs(const FitOutputs& out, const std::filesystem::path& dir);

/// Gradient check on a size x size render: the reference is the phase of a
/// sinusoidally distorted board, the evaluation point the same board with a
/// zero texture of size x size texels and s_r scaled by 1.03.
GradCheckResult synthetic_grad_check(int size = 16, int n_texels = 32, std::uint64_t seed = 7);

/// 16-bit PGM: phase in (-pi, pi] maps linearly to [1, 65535], masked pixels to 0.
void write_phase_pgm(const std::filesystem::path& path, const PhaseImage& phase);
PhaseImage read_phase_pgm(const std::filesystem::path& path);

}  // namespace woodfit
