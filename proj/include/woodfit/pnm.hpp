#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "woodfit/raster.hpp"

namespace woodfit {

/// File or stream level failure (missing file, bad header, truncated data).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw binary portable any-map (P5 graymap or P6 pixmap). Samples are kept
/// unnormalized so a decode/encode cycle reproduces the file byte for byte.
struct PnmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  int channels = 1;  // 1 for P5, 3 for P6
  std::vector<std::uint16_t> samples;
};

PnmImage decode_pnm(std::string_view bytes);
std::string encode_pnm(const PnmImage& img);

PnmImage read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const PnmImage& img);

/// Normalizes samples by maxval. Color input is reduced to the HSV value
/// channel when `to_gray` is used on a pixmap.
GrayImage to_gray(const PnmImage& img);
RgbImage to_rgb(const PnmImage& img);

/// Quantizes with round-half-up after clamping to [0,1].
PnmImage from_gray(const GrayImage& img, int maxval = 255);
PnmImage from_rgb(const RgbImage& img, int maxval = 255);

/// Convenience loaders.
GrayImage read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const GrayImage& img,
                int maxval = 255);
void write_rgb(const std::filesystem::path& path, const RgbImage& img,
               int maxval = 255);

}  // namespace woodfit
