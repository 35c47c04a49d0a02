#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace woodfit {

/// Tangential board placed in the tree's cylindrical frame. Pixel (u, v) maps
/// to the tree point (x_offset, (u - u_center) / scale, z_origin + v / scale).
struct BoardPose {
  double u_center = 0.0;  // px
  double x_offset = 0.0;  // radial units, stored non-negative
  double scale = 1.0;     // px per radial unit
  double s_r = 1.0;       // radial units per ring
  double z_origin = 0.0;  // radial units
  bool sign_ambiguous = true;
  bool center_outside_image = false;

  double tree_y(double u) const { return (u - u_center) / scale; }
  double tree_z(double v) const { return z_origin + v / scale; }

  /// Same image-space geometry expressed with scale = 1 (radial unit = px).
  BoardPose in_pixel_units() const;
};

std::string format_pose(const BoardPose& pose);
BoardPose parse_pose(std::string_view text);
BoardPose read_pose(const std::filesystem::path& path);
void write_pose(const std::filesystem::path& path, const BoardPose& pose);

}  // namespace woodfit
