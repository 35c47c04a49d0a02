// woodfit command line: one subcommand per pipeline stage.
//
// Config precedence, lowest first: built-in defaults, --config file, --set
// key=value (in order), dedicated flags such as --epochs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "woodfit/dendro_eval.hpp"
#include "woodfit/parallel.hpp"
#include "woodfit/pipeline.hpp"
#include "woodfit/pnm.hpp"
#include "woodfit/synth.hpp"
#include "woodfit/text_io.hpp"

namespace fs = std::filesystem;
using namespace woodfit;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kInsufficient = 3, kNumeric = 4 };

std::string g_stage = "setup";

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("input not found: " + p.string());
}

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  // FitConfig fields as dedicated flags.
  std::optional<double> learning_rate, adam_beta1, adam_beta2, adam_eps, loss_mask_mag_min;
  std::optional<double> idw_radius_rings, idw_smooth_texels, cut_margin, axis_exclusion_rings;
  std::optional<double> step_smooth_texels;
  std::optional<int> epochs, texture_rows, texture_cols, kappa_range;
  std::optional<bool> optimize_s_r;

  void add(CLI::App* cmd, bool fit_flags) {
    cmd->add_option("--config", file, "flat key = value config file");
    cmd->add_option("--set", sets, "override one config key, key=value");
    if (!fit_flags) return;
    cmd->add_option("--learning-rate", learning_rate);
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--adam-beta1", adam_beta1);
    cmd->add_option("--adam-beta2", adam_beta2);
    cmd->add_option("--adam-eps", adam_eps);
    cmd->add_option("--loss-mask-mag-min", loss_mask_mag_min);
    cmd->add_option("--optimize-s-r", optimize_s_r);
    cmd->add_option("--texture-rows", texture_rows);
    cmd->add_option("--texture-cols", texture_cols);
    cmd->add_option("--idw-radius-rings", idw_radius_rings);
    cmd->add_option("--idw-smooth-texels", idw_smooth_texels);
    cmd->add_option("--kappa-range", kappa_range);
    cmd->add_option("--axis-exclusion-rings", axis_exclusion_rings);
    cmd->add_option("--step-smooth-texels", step_smooth_texels);
    cmd->add_option("--cut-margin", cut_margin);
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!file.empty()) {
      require_file(file);
      cfg = parse_config(read_text_file(file));
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw FormatError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
    }
    FitConfig& f = cfg.fit;
    if (learning_rate) f.learning_rate = *learning_rate;
    if (epochs) f.epochs = *epochs;
    if (adam_beta1) f.adam_beta1 = *adam_beta1;
    if (adam_beta2) f.adam_beta2 = *adam_beta2;
    if (adam_eps) f.adam_eps = *adam_eps;
    if (loss_mask_mag_min) f.loss_mask_mag_min = *loss_mask_mag_min;
    if (optimize_s_r) f.optimize_s_r = *optimize_s_r;
    if (texture_rows) f.texture_rows = *texture_rows;
    if (texture_cols) f.texture_cols = *texture_cols;
    if (idw_radius_rings) f.idw_radius_rings = *idw_radius_rings;
    if (idw_smooth_texels) f.idw_smooth_texels = *idw_smooth_texels;
    if (kappa_range) f.kappa_range = *kappa_range;
    if (axis_exclusion_rings) f.axis_exclusion_rings = *axis_exclusion_rings;
    if (step_smooth_texels) f.step_smooth_texels = *step_smooth_texels;
    if (cut_margin) f.cut_margin = *cut_margin;
    validate(cfg);
    return cfg;
  }
};

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "woodfit: warning: " << w << "\n";
}

int run_detect(const std::string& input, const fs::path& out, const ConfigFlags& flags) {
  const PipelineConfig cfg = flags.resolve();
  g_stage = "read";
  require_file(input);
  const GrayImage gray = to_gray(read_pnm(input));
  g_stage = "detect";
  const Detection d = detect(gray, cfg);
  warn(d.warnings);
  g_stage = "write";
  fs::create_directories(out);
  write_phase_pgm(out / "phase.pgm", d.phase);
  write_text_file(out / "magnitude.txt", format_grid(d.raw.magnitude));
  write_ring_set(out / "rings.csv", d.rings);
  std::cout << "rings " << d.rings.rings.size() << "\n";
  return kOk;
}

int run_locate(const std::string& rings_path, int width, int height, const fs::path& out,
               const ConfigFlags& flags) {
  const PipelineConfig cfg = flags.resolve();
  g_stage = "read";
  require_file(rings_path);
  const RingSet rings = read_ring_set(rings_path);
  g_stage = "locate";
  const BoardPose pose = locate_board(rings, width, height, cfg.pose);
  g_stage = "write";
  write_pose(out, pose);
  std::cout << format_pose(pose);
  return kOk;
}

int run_fit_cmd(const std::string& input, const fs::path& out, bool dump_phase,
                const ConfigFlags& flags) {
  const PipelineConfig cfg = flags.resolve();
  g_stage = "read";
  require_file(input);
  const RgbImage rgb = to_rgb(read_pnm(input));
  g_stage = "fit";
  const FitOutputs fit = run_fit(rgb, cfg);
  warn(fit.detection.warnings);
  g_stage = "write";
  write_fit_outputs(fit, out);
  if (dump_phase) write_phase_pgm(out / "reference_phase.pgm", fit.reference);
  for (std::size_t e = 0; e < fit.report.loss.size(); ++e)
    std::cerr << "epoch " << e << " loss " << format_double(fit.report.loss[e]) << "\n";
  if (fit.report.fold_over) std::cerr << "woodfit: warning: fitted distortion folds over\n";
  std::cout << format_fit_summary(fit.report);
  return kOk;
}

int run_render(const std::string& pose_path, const std::string& tex_path, const std::string& cmap_path,
               int width, int height, const fs::path& out, const std::string& phase_out) {
  g_stage = "read";
  for (const auto& p : {pose_path, tex_path, cmap_path}) require_file(p);
  WoodModelParams params;
  params.pose = read_pose(pose_path);
  params.distortion = read_texture(tex_path);
  params.colormap = read_colormap(cmap_path);
  g_stage = "render";
  const RgbImage img = render_color(params, width, height);
  g_stage = "write";
  write_rgb(out, img);
  if (!phase_out.empty()) write_phase_pgm(phase_out, render_phase(params, width, height));
  return kOk;
}

int run_eval(const std::string& rings_path, const std::string& labels_path, double threshold) {
  g_stage = "read";
  require_file(rings_path);
  require_file(labels_path);
  const RingSet rings = read_ring_set(rings_path);
  const RingLabels labels = read_labels(labels_path);
  g_stage = "eval";
  std::cout << format_score_report(score_detection(rings, labels, threshold));
  return kOk;
}

int run_synth(const std::string& preset, const std::string& spec_file,
              const std::vector<std::string>& sets, const fs::path& out) {
  g_stage = "synth";
  SynthSpec spec;
  if (preset == "detection") spec = detection_benchmark();
  else if (preset == "fit") spec = fit_benchmark();
  else if (!preset.empty()) throw std::invalid_argument("unknown preset '" + preset + "'");
  if (!spec_file.empty()) {
    require_file(spec_file);
    spec = parse_synth_spec(read_text_file(spec_file), spec);
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FormatError("--set expects key=value, got '" + kv + "'");
    apply_synth_setting(spec, std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }
  const SynthOutput s = generate(spec);
  g_stage = "write";
  fs::create_directories(out);
  write_rgb(out / "image.ppm", s.rgb);
  write_gray(out / "gray.pgm", s.gray);
  write_phase_pgm(out / "phase.pgm", s.phase);
  write_labels(out / "labels.csv", s.labels);
  write_pose(out / "pose.txt", s.params.pose);
  write_texture(out / "distortion.txt", s.params.distortion);
  write_colormap(out / "colormap.csv", s.params.colormap);
  write_text_file(out / "spec.txt", format_synth_spec(spec));
  return kOk;
}

int run_gradcheck(int size, int texels, std::uint64_t seed, double tolerance) {
  g_stage = "gradcheck";
  const GradCheckResult r = synthetic_grad_check(size, texels, seed);
  std::cout << "max_relative_error = " << format_double(r.max_relative_error) << "\n"
            << "checked_parameters = " << r.checked_parameters << "\n"
            << "pixels_used = " << r.pixels_used << "\n"
            << "pixels_excluded = " << r.pixels_excluded << "\n";
  return r.max_relative_error < tolerance ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wood model fitting from planar board images"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "worker threads (0 = all cores)");

  std::string input, out, rings_path, labels_path, pose_path, tex_path, cmap_path, phase_out;
  int width = 0, height = 0;
  double threshold = 3.0;

  ConfigFlags detect_flags, locate_flags, fit_flags;
  auto* detect_cmd = app.add_subcommand("detect", "phase, magnitude and ring traces");
  detect_cmd->add_option("image", input, "PGM/PPM input")->required();
  detect_cmd->add_option("-o,--out", out, "output directory")->required();
  detect_flags.add(detect_cmd, false);

  auto* locate_cmd = app.add_subcommand("locate", "board pose from ring traces");
  locate_cmd->add_option("rings", rings_path, "ring CSV")->required();
  locate_cmd->add_option("--width", width)->required();
  locate_cmd->add_option("--height", height)->required();
  locate_cmd->add_option("-o,--out", out, "pose file")->required();
  locate_flags.add(locate_cmd, false);

  bool dump_phase = false;
  auto* fit_cmd = app.add_subcommand("fit", "full fit: pose, distortion, colormap");
  fit_cmd->add_option("image", input, "PGM/PPM input")->required();
  fit_cmd->add_option("-o,--out", out, "output directory")->required();
  fit_cmd->add_flag("--dump-phase", dump_phase, "also write the reference phase");
  fit_flags.add(fit_cmd, true);

  auto* render_cmd = app.add_subcommand("render", "render model parameters");
  render_cmd->add_option("--pose", pose_path)->required();
  render_cmd->add_option("--distortion", tex_path)->required();
  render_cmd->add_option("--colormap", cmap_path)->required();
  render_cmd->add_option("--width", width)->required();
  render_cmd->add_option("--height", height)->required();
  render_cmd->add_option("-o,--out", out, "PPM output")->required();
  render_cmd->add_option("--phase", phase_out, "optional phase PGM output");

  auto* eval_cmd = app.add_subcommand("eval", "score ring traces against labels");
  eval_cmd->add_option("rings", rings_path)->required();
  eval_cmd->add_option("labels", labels_path)->required();
  eval_cmd->add_option("--threshold", threshold, "match distance in px");

  std::string preset, spec_file;
  std::vector<std::string> synth_sets;
  auto* synth_cmd = app.add_subcommand("synth", "synthetic board with ground truth");
  synth_cmd->add_option("--preset", preset, "detection or fit benchmark");
  synth_cmd->add_option("--spec", spec_file, "key = value synth spec");
  synth_cmd->add_option("--set", synth_sets, "override one spec key, key=value");
  synth_cmd->add_option("-o,--out", out, "output directory")->required();

  int gc_size = 16, gc_texels = 32;
  std::uint64_t gc_seed = 7;
  double gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "reverse mode vs finite differences");
  gc_cmd->add_option("--size", gc_size);
  gc_cmd->add_option("--texels", gc_texels);
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--tolerance", gc_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (workers < 0) throw std::invalid_argument("--workers must be >= 0");
    if (workers > 0) set_worker_count(workers);
    if (*detect_cmd) return run_detect(input, out, detect_flags);
    if (*locate_cmd) return run_locate(rings_path, width, height, out, locate_flags);
    if (*fit_cmd) return run_fit_cmd(input, out, dump_phase, fit_flags);
    if (*render_cmd) return run_render(pose_path, tex_path, cmap_path, width, height, out, phase_out);
    if (*eval_cmd) return run_eval(rings_path, labels_path, threshold);
    if (*synth_cmd) return run_synth(preset, spec_file, synth_sets, out);
    if (*gc_cmd) return run_gradcheck(gc_size, gc_texels, gc_seed, gc_tol);
  } catch (const InsufficientDataError& e) {
    std::cerr << "woodfit: " << g_stage << ": insufficient data: " << e.what() << "\n";
    return kInsufficient;
  } catch (const NumericError& e) {
    std::cerr << "woodfit: " << g_stage << ": numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "woodfit: " << g_stage << ": " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "woodfit: " << g_stage << ": " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "woodfit: " << g_stage << ": " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
