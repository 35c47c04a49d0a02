#include "woodfit/wood_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "woodfit/parallel.hpp"
#include "woodfit/text_io.hpp"

namespace woodfit {

DistortionTexture::DistortionTexture(int rows_, int cols_, double r_max_, double z_max_, double fill)
    : rows(rows_), cols(cols_), r_max(r_max_), z_max(z_max_) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("distortion texture needs >= 2x2 texels");
  if (!(r_max > 0.0) || !(z_max > 0.0))
    throw std::invalid_argument("distortion texture extents must be positive");
  values.assign(static_cast<std::size_t>(rows) * cols, fill);
}

TexelStencil distortion_stencil(const DistortionTexture& tex, double r, double z) {
  const double fr_raw = r / tex.r_step();
  const double fz = std::clamp(z / tex.z_step(), 0.0, tex.cols - 1.0);
  const double fr = std::clamp(fr_raw, 0.0, tex.rows - 1.0);
  const int i0 = std::min(static_cast<int>(fr), tex.rows - 2);
  const int j0 = std::min(static_cast<int>(fz), tex.cols - 2);
  const double a = fr - i0, b = fz - j0;
  TexelStencil s;
  const std::size_t base = static_cast<std::size_t>(i0) * tex.cols + j0;
  s.index = {base, base + 1, base + tex.cols, base + tex.cols + 1};
  s.weight = {(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b};
  if (fr_raw > 0.0 && fr_raw < tex.rows - 1.0) {
    const double m0 = (1 - b) * tex.values[s.index[0]] + b * tex.values[s.index[1]];
    const double m1 = (1 - b) * tex.values[s.index[2]] + b * tex.values[s.index[3]];
    s.dm_dr = (m1 - m0) / tex.r_step();
  }
  return s;
}

double sample_distortion(const DistortionTexture& tex, double r, double z) {
  const auto s = distortion_stencil(tex, r, z);
  double m = 0.0;
  for (int k = 0; k < 4; ++k) m += s.weight[k] * tex.values[s.index[k]];
  return m;
}

ColorMap::ColorMap(int n, int spr, Rgb fill) : n_rings(n), samples_per_ring(spr) {
  if (n < 1 || spr < 1) throw std::invalid_argument("colormap needs >= 1 ring and >= 1 sample");
  values.assign(static_cast<std::size_t>(n) * spr, fill);
}

Rgb ColorMap::color(long ring, double frac) const {
  const int k = static_cast<int>(std::clamp<long>(ring, 0, n_rings - 1));
  const int n = samples_per_ring;
  if (lookup == ColorLookup::nearest || n == 1) {
    const int s = std::clamp(static_cast<int>(std::floor(frac * n)), 0, n - 1);
    return at(k, s);
  }
  const double t = frac * n - 0.5;
  const int i0 = std::clamp(static_cast<int>(std::floor(t)), 0, n - 2);
  const double w = t - i0;
  const Rgb& c0 = at(k, i0);
  const Rgb& c1 = at(k, i0 + 1);
  Rgb out;
  for (int ch = 0; ch < 3; ++ch) out[ch] = std::clamp(c0[ch] + w * (c1[ch] - c0[ch]), 0.0, 1.0);
  return out;
}

TreePoint tree_point(const BoardPose& pose, double u, double v) {
  const double y = pose.tree_y(u);
  return {std::sqrt(pose.x_offset * pose.x_offset + y * y), pose.tree_z(v)};
}

double distorted_radius(const WoodModelParams& params, TreePoint q) {
  return q.r + sample_distortion(params.distortion, q.r, q.z);
}

double ring_coordinate(const WoodModelParams& params, double u, double v) {
  return distorted_radius(params, tree_point(params.pose, u, v)) / params.pose.s_r;
}

double phase_of(double ring_coord) {
  return wrap_angle(kTwoPi * (ring_coord - std::floor(ring_coord)));
}

GrowthPosition growth_profile(double ring_coord) {
  const double k = std::floor(ring_coord);
  return {static_cast<long>(k), ring_coord - k};
}

ScalarField render_ring_coordinate(const WoodModelParams& params, int width, int height) {
  ScalarField out(width, height);
  parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < width; ++u) out(u, v) = ring_coordinate(params, u, v);
  });
  return out;
}

PhaseImage render_phase(const WoodModelParams& params, int width, int height) {
  const ScalarField ring = render_ring_coordinate(params, width, height);
  PhaseImage out{ScalarField(width, height), Mask(width, height, 1)};
  for (std::size_t i = 0; i < ring.size(); ++i) out.phase.data()[i] = phase_of(ring.data()[i]);
  return out;
}

RgbImage render_color(const WoodModelParams& params, int width, int height) {
  const ScalarField ring = render_ring_coordinate(params, width, height);
  RgbImage out(width, height);
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const auto g = growth_profile(ring.data()[i]);
    out.data()[i] = params.colormap.color(g.ring, g.frac);
  }
  return out;
}

double phase_derivative_s_r(const WoodModelParams& params, double u, double v) {
  const double rp = distorted_radius(params, tree_point(params.pose, u, v));
  const double ring = rp / params.pose.s_r;
  if (ring == std::floor(ring)) return 0.0;
  return -kTwoPi * rp / (params.pose.s_r * params.pose.s_r);
}

DistortionTexture footprint_texture(const BoardPose& pose, int width, int height, int rows,
                                    int cols) {
  const double y_extent =
      std::max(std::abs(pose.tree_y(0.0)), std::abs(pose.tree_y(std::max(width - 1, 0))));
  const double r_max = std::hypot(pose.x_offset, y_extent) + pose.s_r;
  const double z_max = std::max(pose.tree_z(std::max(height - 1, 0)), 0.0) + pose.s_r;
  return DistortionTexture(rows, cols, r_max, z_max);
}

bool has_fold_over(const DistortionTexture& tex) {
  const double dr = tex.r_step();
  for (int i = 0; i + 1 < tex.rows; ++i)
    for (int j = 0; j < tex.cols; ++j)
      if (!(dr + tex.at(i + 1, j) - tex.at(i, j) > 0.0)) return true;
  return false;
}

namespace {

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<double> numbers_of(std::string_view line, std::string_view what) {
  std::vector<double> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, what));
  return out;
}

}  // namespace

std::string format_texture(const DistortionTexture& tex) {
  std::string out = std::to_string(tex.rows) + "\n" + std::to_string(tex.cols) + "\n" +
                    format_double(tex.r_max) + "\n" + format_double(tex.z_max) + "\n";
  for (int i = 0; i < tex.rows; ++i) {
    for (int j = 0; j < tex.cols; ++j) {
      if (j) out += ' ';
      out += format_double(tex.at(i, j));
    }
    out += '\n';
  }
  return out;
}

DistortionTexture parse_texture(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.size() < 4) throw FormatError("texture: missing header");
  const long rows = parse_int(lines[0], "texture rows");
  const long cols = parse_int(lines[1], "texture cols");
  const double r_max = parse_double(lines[2], "texture r_max");
  const double z_max = parse_double(lines[3], "texture z_max");
  if (rows < 2 || cols < 2 || !(r_max > 0.0) || !(z_max > 0.0))
    throw FormatError("texture: invalid header");
  if (lines.size() != static_cast<std::size_t>(4 + rows))
    throw FormatError("texture: expected " + std::to_string(rows) + " rows");
  DistortionTexture tex(static_cast<int>(rows), static_cast<int>(cols), r_max, z_max);
  for (long i = 0; i < rows; ++i) {
    const auto row = numbers_of(lines[4 + i], "texture value");
    if (row.size() != static_cast<std::size_t>(cols))
      throw FormatError("texture: row " + std::to_string(i) + " has wrong length");
    for (long j = 0; j < cols; ++j) {
      if (!std::isfinite(row[j])) throw FormatError("texture: non-finite value");
      tex.at(static_cast<int>(i), static_cast<int>(j)) = row[j];
    }
  }
  return tex;
}

DistortionTexture read_texture(const std::filesystem::path& path) {
  return parse_texture(read_text_file(path));
}

void write_texture(const std::filesystem::path& path, const DistortionTexture& tex) {
  write_text_file(path, format_texture(tex));
}

std::string format_colormap(const ColorMap& cmap) {
  std::string out = "ring,frac_index,r,g,b\n";
  for (int k = 0; k < cmap.n_rings; ++k)
    for (int s = 0; s < cmap.samples_per_ring; ++s) {
      const Rgb& c = cmap.at(k, s);
      out += std::to_string(k) + "," + std::to_string(s) + "," + format_double(c[0]) + "," +
             format_double(c[1]) + "," + format_double(c[2]) + "\n";
    }
  return out;
}

ColorMap parse_colormap(std::string_view text) {
  auto lines = lines_of(text);
  if (!lines.empty() && lines.front().starts_with("ring")) lines.erase(lines.begin());
  if (lines.empty()) throw FormatError("colormap: no entries");
  struct Entry {
    long ring, s;
    Rgb c;
  };
  std::vector<Entry> entries;
  long n_rings = 0, spr = 0;
  for (const auto& line : lines) {
    const auto f = split_fields(line, ',');
    if (f.size() != 5) throw FormatError("colormap: expected 5 fields per line");
    Entry e{parse_int(f[0], "ring"), parse_int(f[1], "frac_index"),
            {parse_double(f[2], "r"), parse_double(f[3], "g"), parse_double(f[4], "b")}};
    if (e.ring < 0 || e.s < 0) throw FormatError("colormap: negative index");
    for (double ch : e.c)
      if (!(ch >= 0.0 && ch <= 1.0)) throw FormatError("colormap: channel outside [0,1]");
    n_rings = std::max(n_rings, e.ring + 1);
    spr = std::max(spr, e.s + 1);
    entries.push_back(e);
  }
  if (entries.size() != static_cast<std::size_t>(n_rings * spr))
    throw FormatError("colormap: table is not complete");
  ColorMap cmap(static_cast<int>(n_rings), static_cast<int>(spr));
  std::vector<bool> seen(entries.size(), false);
  for (const auto& e : entries) {
    const auto idx = static_cast<std::size_t>(e.ring * spr + e.s);
    if (seen[idx]) throw FormatError("colormap: duplicate entry");
    seen[idx] = true;
    cmap.values[idx] = e.c;
  }
  return cmap;
}

ColorMap read_colormap(const std::filesystem::path& path) {
  return parse_colormap(read_text_file(path));
}

void write_colormap(const std::filesystem::path& path, const ColorMap& cmap) {
  write_text_file(path, format_colormap(cmap));
}

std::string format_grid(const ScalarField& field) {
  std::string out = std::to_string(field.width()) + " " + std::to_string(field.height()) + "\n";
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      if (x) out += ' ';
      out += format_double(field(x, y));
    }
    out += '\n';
  }
  return out;
}

ScalarField parse_grid(std::string_view text) {
  std::istringstream in{std::string(text)};
  long w = 0, h = 0;
  if (!(in >> w >> h) || w < 0 || h < 0) throw FormatError("grid: bad header");
  ScalarField out(static_cast<int>(w), static_cast<int>(h));
  std::string tok;
  for (double& v : out.data()) {
    if (!(in >> tok)) throw FormatError("grid: truncated");
    v = parse_double(tok, "grid value");
  }
  if (in >> tok) throw FormatError("grid: trailing data");
  return out;
}

}  // namespace woodfit
