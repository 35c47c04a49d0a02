#include "woodfit/board_pose.hpp"

#include <cmath>
#include <set>

#include "woodfit/text_io.hpp"

namespace woodfit {

BoardPose BoardPose::in_pixel_units() const {
  BoardPose p = *this;
  p.x_offset = x_offset * scale;
  p.s_r = s_r * scale;
  p.z_origin = z_origin * scale;
  p.scale = 1.0;
  return p;
}

std::string format_pose(const BoardPose& pose) {
  KeyValueList kv{{"u_center", format_double(pose.u_center)},
                  {"x_offset", format_double(pose.x_offset)},
                  {"scale", format_double(pose.scale)},
                  {"s_r", format_double(pose.s_r)},
                  {"z_origin", format_double(pose.z_origin)},
                  {"sign_ambiguous", pose.sign_ambiguous ? "true" : "false"}};
  if (pose.center_outside_image) kv.emplace_back("center_outside_image", "true");
  return format_key_values(kv);
}

BoardPose parse_pose(std::string_view text) {
  const auto kv = parse_key_values(text);
  static const std::set<std::string> required{"u_center", "x_offset", "scale",
                                              "s_r", "z_origin", "sign_ambiguous"};
  for (const auto& key : required)
    if (!kv.contains(key)) throw FormatError("pose: missing key '" + key + "'");
  for (const auto& [key, value] : kv)
    if (!required.contains(key) && key != "center_outside_image")
      throw FormatError("pose: unknown key '" + key + "'");

  BoardPose p;
  p.u_center = parse_double(kv.at("u_center"), "u_center");
  p.x_offset = parse_double(kv.at("x_offset"), "x_offset");
  p.scale = parse_double(kv.at("scale"), "scale");
  p.s_r = parse_double(kv.at("s_r"), "s_r");
  p.z_origin = parse_double(kv.at("z_origin"), "z_origin");
  p.sign_ambiguous = parse_bool(kv.at("sign_ambiguous"), "sign_ambiguous");
  if (kv.contains("center_outside_image"))
    p.center_outside_image = parse_bool(kv.at("center_outside_image"), "center_outside_image");
  if (!(p.scale > 0.0) || !(p.s_r > 0.0) || !(p.x_offset >= 0.0) || !std::isfinite(p.u_center) ||
      !std::isfinite(p.z_origin))
    throw FormatError("pose: values violate scale > 0, s_r > 0, x_offset >= 0");
  return p;
}

BoardPose read_pose(const std::filesystem::path& path) { return parse_pose(read_text_file(path)); }

void write_pose(const std::filesystem::path& path, const BoardPose& pose) {
  write_text_file(path, format_pose(pose));
}

}  // namespace woodfit
