#include "woodfit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "woodfit/pnm.hpp"
#include "woodfit/text_io.hpp"

namespace woodfit {

namespace {

struct Field {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field number(T PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& v) {
            if constexpr (std::is_integral_v<T>) c.*member = static_cast<T>(parse_int(v, "value"));
            else c.*member = parse_double(v, "value");
          },
          [member](const PipelineConfig& c) {
            if constexpr (std::is_integral_v<T>) return std::to_string(c.*member);
            else return format_double(c.*member);
          }};
}

template <typename S, typename T>
Field nested(S PipelineConfig::*outer, T S::*member) {
  return {[outer, member](PipelineConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(v, "value");
            else if constexpr (std::is_integral_v<T>) (c.*outer).*member = static_cast<T>(parse_int(v, "value"));
            else (c.*outer).*member = parse_double(v, "value");
          },
          [outer, member](const PipelineConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*outer).*member ? "true" : "false");
            else if constexpr (std::is_integral_v<T>) return std::to_string((c.*outer).*member);
            else return format_double((c.*outer).*member);
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("smooth_sigma", number(&PipelineConfig::smooth_sigma));
    t.emplace_back("orientation_window_w", number(&PipelineConfig::orientation_window_w));
    t.emplace_back("orientation_window_h", number(&PipelineConfig::orientation_window_h));
    t.emplace_back("refined_window_w", number(&PipelineConfig::refined_window_w));
    t.emplace_back("refined_window_h", number(&PipelineConfig::refined_window_h));
    t.emplace_back("gabor_p", nested(&PipelineConfig::gabor, &GaborConfig::p));
    t.emplace_back("gabor_q", nested(&PipelineConfig::gabor, &GaborConfig::q));
    t.emplace_back("gabor_stride", nested(&PipelineConfig::gabor, &GaborConfig::stride));
    t.emplace_back("splat_radius", nested(&PipelineConfig::gabor, &GaborConfig::splat_radius));
    t.emplace_back("frequency_stride", nested(&PipelineConfig::gabor, &GaborConfig::frequency_stride));
    t.emplace_back("sigma_x_periods", nested(&PipelineConfig::gabor, &GaborConfig::sigma_x_periods));
    t.emplace_back("sigma_y_periods", nested(&PipelineConfig::gabor, &GaborConfig::sigma_y_periods));
    t.emplace_back("curvature_threshold", nested(&PipelineConfig::gabor, &GaborConfig::curvature_threshold));
    t.emplace_back("f_min", Field{[](PipelineConfig& c, const std::string& v) { c.gabor.frequency.f_min = parse_double(v, "f_min"); },
                                  [](const PipelineConfig& c) { return format_double(c.gabor.frequency.f_min); }});
    t.emplace_back("f_max", Field{[](PipelineConfig& c, const std::string& v) { c.gabor.frequency.f_max = parse_double(v, "f_max"); },
                                  [](const PipelineConfig& c) { return format_double(c.gabor.frequency.f_max); }});
    t.emplace_back("accumulation_weight",
                   Field{[](PipelineConfig& c, const std::string& v) {
                           if (v == "uniform") c.gabor.weighting = AccumulationWeight::uniform;
                           else if (v == "coherence") c.gabor.weighting = AccumulationWeight::coherence;
                           else throw FormatError("expected uniform or coherence");
                         },
                         [](const PipelineConfig& c) {
                           return std::string(c.gabor.weighting == AccumulationWeight::uniform ? "uniform" : "coherence");
                         }});
    t.emplace_back("tracer_tol", nested(&PipelineConfig::tracer, &TracerConfig::tol));
    t.emplace_back("tracer_mag_min_fraction", nested(&PipelineConfig::tracer, &TracerConfig::mag_min_fraction));
    t.emplace_back("tracer_step", nested(&PipelineConfig::tracer, &TracerConfig::step));
    t.emplace_back("tracer_gap_max", nested(&PipelineConfig::tracer, &TracerConfig::gap_max));
    t.emplace_back("tracer_max_steps", nested(&PipelineConfig::tracer, &TracerConfig::max_steps));
    t.emplace_back("tracer_min_separation", nested(&PipelineConfig::tracer, &TracerConfig::min_separation));
    t.emplace_back("tracer_min_points", nested(&PipelineConfig::tracer, &TracerConfig::min_points));
    t.emplace_back("ring_phase", nested(&PipelineConfig::tracer, &TracerConfig::ring_phase));
    t.emplace_back("reference_row", nested(&PipelineConfig::tracer, &TracerConfig::reference_row));
    t.emplace_back("pose_x_half_rings", nested(&PipelineConfig::pose, &PoseGrid::x_half_rings));
    t.emplace_back("pose_x_step_rings", nested(&PipelineConfig::pose, &PoseGrid::x_step_rings));
    t.emplace_back("pose_scale_half", nested(&PipelineConfig::pose, &PoseGrid::scale_half));
    t.emplace_back("pose_scale_step", nested(&PipelineConfig::pose, &PoseGrid::scale_step));
    t.emplace_back("pose_z_step_rings", nested(&PipelineConfig::pose, &PoseGrid::z_step_rings));
    t.emplace_back("pose_refine", nested(&PipelineConfig::pose, &PoseGrid::refine));
    t.emplace_back("pose_u_half", nested(&PipelineConfig::pose, &PoseGrid::u_half));
    t.emplace_back("pose_u_step", nested(&PipelineConfig::pose, &PoseGrid::u_step));
    t.emplace_back("learning_rate", nested(&PipelineConfig::fit, &FitConfig::learning_rate));
    t.emplace_back("epochs", nested(&PipelineConfig::fit, &FitConfig::epochs));
    t.emplace_back("adam_beta1", nested(&PipelineConfig::fit, &FitConfig::adam_beta1));
    t.emplace_back("adam_beta2", nested(&PipelineConfig::fit, &FitConfig::adam_beta2));
    t.emplace_back("adam_eps", nested(&PipelineConfig::fit, &FitConfig::adam_eps));
    t.emplace_back("loss_mask_mag_min", nested(&PipelineConfig::fit, &FitConfig::loss_mask_mag_min));
    t.emplace_back("optimize_s_r", nested(&PipelineConfig::fit, &FitConfig::optimize_s_r));
    t.emplace_back("texture_rows", nested(&PipelineConfig::fit, &FitConfig::texture_rows));
    t.emplace_back("texture_cols", nested(&PipelineConfig::fit, &FitConfig::texture_cols));
    t.emplace_back("idw_radius_rings", nested(&PipelineConfig::fit, &FitConfig::idw_radius_rings));
    t.emplace_back("idw_smooth_texels", nested(&PipelineConfig::fit, &FitConfig::idw_smooth_texels));
    t.emplace_back("kappa_range", nested(&PipelineConfig::fit, &FitConfig::kappa_range));
    t.emplace_back("axis_exclusion_rings", nested(&PipelineConfig::fit, &FitConfig::axis_exclusion_rings));
    t.emplace_back("step_smooth_texels", nested(&PipelineConfig::fit, &FitConfig::step_smooth_texels));
    t.emplace_back("cut_margin", nested(&PipelineConfig::fit, &FitConfig::cut_margin));
    t.emplace_back("colormap_samples", number(&PipelineConfig::colormap_samples));
    t.emplace_back("color_lookup",
                   Field{[](PipelineConfig& c, const std::string& v) {
                           if (v == "linear") c.color_lookup = ColorLookup::linear;
                           else if (v == "nearest") c.color_lookup = ColorLookup::nearest;
                           else throw FormatError("expected linear or nearest");
                         },
                         [](const PipelineConfig& c) {
                           return std::string(c.color_lookup == ColorLookup::linear ? "linear" : "nearest");
                         }});
    t.emplace_back("eval_threshold", number(&PipelineConfig::eval_threshold));
    t.emplace_back("resize_width", number(&PipelineConfig::resize_width));
    return t;
  }();
  return table;
}

bool odd_positive(int v) { return v >= 1 && v % 2 == 1; }

template <typename Pixel>
Raster<Pixel> resize_impl(const Raster<Pixel>& img, int width, auto lerp) {
  if (width <= 0 || width == img.width()) return img;
  const double factor = static_cast<double>(img.width()) / width;
  const int height = std::max(1, static_cast<int>(std::lround(img.height() / factor)));
  Raster<Pixel> out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp((x + 0.5) * factor - 0.5, 0.0, img.width() - 1.0);
      const double sy = std::clamp((y + 0.5) * factor - 0.5, 0.0, img.height() - 1.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const double fx = sx - x0, fy = sy - y0;
      out(x, y) = lerp(lerp(img.clamped(x0, y0), img.clamped(x0 + 1, y0), fx),
                       lerp(img.clamped(x0, y0 + 1), img.clamped(x0 + 1, y0 + 1), fx), fy);
    }
  return out;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : fields())
    if (k == key) {
      try {
        f.set(config, value);
      } catch (const FormatError& e) {
        throw FormatError(key + ": " + e.what());
      }
      return;
    }
  throw FormatError("unknown config key '" + key + "'");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  for (const auto& [key, value] : parse_key_values(text)) apply_setting(base, key, value);
  return base;
}

std::string format_config(const PipelineConfig& config) {
  KeyValueList kv;
  for (const auto& [k, f] : fields()) kv.emplace_back(k, f.get(config));
  return format_key_values(kv);
}

void validate(const PipelineConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(c.smooth_sigma >= 0.0, "smooth_sigma must be >= 0");
  require(odd_positive(c.orientation_window_w) && odd_positive(c.orientation_window_h),
          "orientation windows must be odd and >= 1");
  require(odd_positive(c.refined_window_w) && odd_positive(c.refined_window_h),
          "refined windows must be odd and >= 1");
  require(c.gabor.p >= 1 && c.gabor.q >= 0, "gabor_p must be >= 1 and gabor_q >= 0");
  require(c.gabor.stride >= 1 && c.gabor.frequency_stride >= 1, "strides must be >= 1");
  require(c.gabor.splat_radius >= 0, "splat_radius must be >= 0");
  require(c.gabor.sigma_x_periods > 0.0 && c.gabor.sigma_y_periods > 0.0, "sigma periods must be > 0");
  require(c.gabor.frequency.f_min > 0.0 && c.gabor.frequency.f_max > c.gabor.frequency.f_min,
          "need 0 < f_min < f_max");
  require(c.gabor.curvature_threshold >= 0.0, "curvature_threshold must be >= 0");
  require(c.tracer.tol > 0.0, "tracer_tol must be > 0");
  require(c.tracer.mag_min_fraction >= 0.0, "tracer_mag_min_fraction must be >= 0");
  require(c.tracer.step > 0.0, "tracer_step must be > 0");
  require(c.tracer.gap_max >= 0 && c.tracer.max_steps >= 0, "tracer gap_max and max_steps must be >= 0");
  require(c.tracer.min_separation > 0.0, "tracer_min_separation must be > 0");
  require(c.tracer.min_points >= 1, "tracer_min_points must be >= 1");
  require(c.pose.x_half_rings >= 0.0 && c.pose.x_step_rings > 0.0, "pose x grid invalid");
  require(c.pose.scale_half >= 0.0 && c.pose.scale_half < 1.0 && c.pose.scale_step > 0.0,
          "pose scale grid invalid");
  require(c.pose.z_step_rings > 0.0, "pose_z_step_rings must be > 0");
  require(c.pose.u_half >= 0.0 && c.pose.u_step > 0.0, "pose u grid invalid");
  validate(c.fit);
  require(c.colormap_samples >= 1, "colormap_samples must be >= 1");
  require(c.eval_threshold > 0.0, "eval_threshold must be > 0");
  require(c.resize_width >= 0, "resize_width must be >= 0");
}

GrayImage resize_to_width(const GrayImage& img, int width) {
  return resize_impl(img, width, [](double a, double b, double t) { return a + t * (b - a); });
}

RgbImage resize_to_width(const RgbImage& img, int width) {
  return resize_impl(img, width, [](const Rgb& a, const Rgb& b, double t) {
    return Rgb{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
  });
}

Detection detect(const GrayImage& input, const PipelineConfig& config) {
  validate(config);
  const GrayImage gray = resize_to_width(input, config.resize_width);
  Detection d;
  const GrayImage smooth = gaussian_smooth(gray, config.smooth_sigma);
  const OrientationField initial = orientation_field(
      scharr_gradient(smooth), config.orientation_window_w, config.orientation_window_h);
  const RegionAnalysis regions = analyze_regions(gray, initial, config.gabor);
  const ComplexResponse response = filter_image(gray, initial, regions.frequency, config.gabor);
  d.raw = phase_magnitude(response);
  d.orientation = refined_orientation(d.raw.phase, config.refined_window_w, config.refined_window_h);
  d.raw_rings = trace_all(d.raw.phase, d.raw.magnitude, d.orientation, config.tracer);
  d.phase = d.raw.phase;
  d.rings = d.raw_rings;
  if (d.raw_rings.rings.empty()) {
    d.warnings.push_back("no rings detected");
    return d;
  }
  // The raw phase is odd-symmetric about the tree axis; ring gaps are only a
  // fallback because rings on the far side sit half a ring off in raw phase.
  const AxisEstimate axis = phase_symmetry_axis(d.raw.phase);
  try {
    d.center = initial_pose(d.raw_rings, gray.width(), gray.height());
    if (axis.found) {
      d.center->u_center = axis.u_center;
      d.center->center_outside_image = false;
    }
  } catch (const InsufficientDataError& e) {
    if (!axis.found) {
      d.warnings.push_back(std::string("phase sign left unresolved: ") + e.what());
      return d;
    }
    d.center = BoardPose{};
    d.center->u_center = axis.u_center;
  }
  const ResolvedPhase resolved = resolve_phase_sign(d.raw.phase, *d.center);
  d.center_outside_image = resolved.center_outside_image;
  if (d.center_outside_image) d.warnings.push_back("tree axis projects outside the image");
  d.phase = resolved.phase;
  d.rings = trace_all(d.phase, d.raw.magnitude, d.orientation, config.tracer);
  return d;
}

int rings_covering(const WoodModelParams& params, int width, int height) {
  double top = 0.0;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) top = std::max(top, ring_coordinate(params, u, v));
  return std::max(1, static_cast<int>(std::floor(top)) + 1);
}

FitOutputs run_fit(const RgbImage& input, const PipelineConfig& config) {
  validate(config);
  const RgbImage image = resize_to_width(input, config.resize_width);
  GrayImage gray(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Rgb& c = image.data()[i];
    gray.data()[i] = std::max({c[0], c[1], c[2]});
  }
  PipelineConfig detect_config = config;
  detect_config.resize_width = 0;

  FitOutputs out;
  out.detection = detect(gray, detect_config);
  if (out.detection.rings.rings.size() < 3)
    throw InsufficientDataError("found " + std::to_string(out.detection.rings.rings.size()) +
                                " rings, need at least 3");
  out.pose = locate_board(out.detection.rings, image.width(), image.height(), config.pose);
  const ResolvedPhase resolved = resolve_phase_sign(out.detection.raw.phase, out.pose);
  out.pose.center_outside_image = resolved.center_outside_image;
  // Gabor phase puts ring boundaries at ring_phase, the model at 0.
  out.reference = shift_phase(resolved.phase, -config.tracer.ring_phase);
  out.mask = loss_mask(out.reference, out.detection.raw.magnitude, config.fit.loss_mask_mag_min);
  exclude_axis_band(out.mask, out.pose, config.fit.axis_exclusion_rings);

  out.initial.pose = out.pose;
  const DistortionTexture shape = footprint_texture(out.pose, image.width(), image.height(),
                                                    config.fit.texture_rows, config.fit.texture_cols);
  out.initial.distortion = initial_distortion(out.detection.rings, out.pose, shape, config.fit);
  out.initial.colormap.lookup = config.color_lookup;

  FitResult fit = fit_distortion(out.reference, out.mask, out.initial, config.fit);
  out.fitted = std::move(fit.params);
  out.report = std::move(fit.report);
  out.fitted.colormap.lookup = config.color_lookup;
  out.fitted.colormap = extract_colormap(image, out.fitted,
                                         rings_covering(out.fitted, image.width(), image.height()),
                                         config.colormap_samples);
  out.fitted.colormap.lookup = config.color_lookup;
  return out;
}

void write_fit_outputs(const FitOutputs& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_pose(dir / "pose.txt", out.fitted.pose);
  write_texture(dir / "distortion.txt", out.fitted.distortion);
  write_colormap(dir / "colormap.csv", out.fitted.colormap);
  write_text_file(dir / "fit_report.csv", format_fit_report(out.report));
  write_text_file(dir / "fit_summary.txt", format_fit_summary(out.report));
  write_ring_set(dir / "rings.csv", out.detection.rings);
}

GradCheckResult synthetic_grad_check(int size, int n_texels, std::uint64_t seed) {
  if (size < 4) throw std::invalid_argument("grad check needs size >= 4");
  SynthSpec spec;
  spec.width = spec.height = size;
  const double s = size / 5.0;
  spec.pose = {size / 2.0, 1.5 * s, 1.0, s, 0.0, true, false};
  spec.distortion = DistortionKind::sinusoid;
  spec.amplitude = 0.3 * s;
  spec.texture_size = 64;
  const WoodModelParams truth = synth_params(spec);
  const PhaseImage reference = render_phase(truth, size, size);

  WoodModelParams eval = truth;
  eval.distortion = footprint_texture(truth.pose, size, size, size, size);
  eval.pose.s_r *= 1.03;
  return grad_check(reference, reference.valid, eval, n_texels, seed);
}

void write_phase_pgm(const std::filesystem::path& path, const PhaseImage& phase) {
  PnmImage img{phase.width(), phase.height(), 65535, 1, {}};
  img.samples.reserve(phase.phase.size());
  for (std::size_t i = 0; i < phase.phase.size(); ++i) {
    if (!phase.valid.data()[i]) {
      img.samples.push_back(0);
      continue;
    }
    const double t = (phase.phase.data()[i] + kPi) / kTwoPi;
    img.samples.push_back(static_cast<std::uint16_t>(
        std::clamp<long>(std::lround(1.0 + t * 65534.0), 1, 65535)));
  }
  write_pnm(path, img);
}

PhaseImage read_phase_pgm(const std::filesystem::path& path) {
  const PnmImage img = read_pnm(path);
  if (img.channels != 1 || img.maxval != 65535) throw FormatError("phase dump must be a 16-bit PGM");
  PhaseImage out{ScalarField(img.width, img.height), Mask(img.width, img.height)};
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (img.samples[i] == 0) continue;
    out.valid.data()[i] = 1;
    out.phase.data()[i] = wrap_angle((img.samples[i] - 1.0) / 65534.0 * kTwoPi - kPi);
  }
  return out;
}

}  // namespace woodfit
