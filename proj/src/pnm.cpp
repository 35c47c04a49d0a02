#include "woodfit/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace woodfit {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' &&
               bytes_[pos_] != '\r')
          ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  int read_uint(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() ||
        !std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
      throw IoError(std::string("pnm: expected ") + what);
    long value = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1 << 24) throw IoError(std::string("pnm: ") + what + " too large");
      ++pos_;
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void consume_single_space() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw IoError("pnm: missing whitespace after maxval");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint16_t quantize(double v, int maxval) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return static_cast<std::uint16_t>(maxval);
  return static_cast<std::uint16_t>(std::floor(v * maxval + 0.5));
}

}  // namespace

PnmImage decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw IoError("pnm: unsupported magic (expected P5 or P6)");
  PnmImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader reader(bytes);
  reader.advance(2);
  img.width = reader.read_uint("width");
  img.height = reader.read_uint("height");
  img.maxval = reader.read_uint("maxval");
  if (img.width <= 0 || img.height <= 0) throw IoError("pnm: empty image");
  if (img.maxval <= 0 || img.maxval > 65535) throw IoError("pnm: maxval out of range");
  reader.consume_single_space();

  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t bytes_per_sample = img.maxval < 256 ? 1 : 2;
  if (bytes.size() - reader.pos() < count * bytes_per_sample)
    throw IoError("pnm: truncated raster");

  img.samples.resize(count);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + reader.pos());
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v = bytes_per_sample == 1
                          ? raw[i]
                          : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    if (v > img.maxval) throw IoError("pnm: sample exceeds maxval");
    img.samples[i] = v;
  }
  return img;
}

std::string encode_pnm(const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError("pnm: bad channel count");
  if (img.maxval <= 0 || img.maxval > 65535) throw IoError("pnm: maxval out of range");
  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (img.samples.size() != count) throw IoError("pnm: sample count mismatch");

  std::ostringstream header;
  header << (img.channels == 1 ? "P5" : "P6") << '\n'
         << img.width << ' ' << img.height << '\n'
         << img.maxval << '\n';
  std::string out = header.str();
  const bool wide = img.maxval >= 256;
  out.reserve(out.size() + count * (wide ? 2 : 1));
  for (std::uint16_t v : img.samples) {
    if (wide) {
      out.push_back(static_cast<char>(v >> 8));
      out.push_back(static_cast<char>(v & 0xff));
    } else {
      out.push_back(static_cast<char>(v));
    }
  }
  return out;
}

PnmImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("input not found: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

void write_pnm(const std::filesystem::path& path, const PnmImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path.string());
  const std::string bytes = encode_pnm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage to_gray(const PnmImage& img) {
  GrayImage gray(img.width, img.height);
  const double inv = 1.0 / img.maxval;
  auto& d = gray.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (img.channels == 1) {
      d[i] = img.samples[i] * inv;
    } else {
      const auto* s = &img.samples[3 * i];
      d[i] = std::max({s[0], s[1], s[2]}) * inv;
    }
  }
  return gray;
}

RgbImage to_rgb(const PnmImage& img) {
  RgbImage rgb(img.width, img.height);
  const double inv = 1.0 / img.maxval;
  auto& d = rgb.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (img.channels == 1) {
      const double v = img.samples[i] * inv;
      d[i] = {v, v, v};
    } else {
      d[i] = {img.samples[3 * i] * inv, img.samples[3 * i + 1] * inv,
              img.samples[3 * i + 2] * inv};
    }
  }
  return rgb;
}

PnmImage from_gray(const GrayImage& img, int maxval) {
  PnmImage out{img.width(), img.height(), maxval, 1, {}};
  out.samples.reserve(img.size());
  for (double v : img.data()) out.samples.push_back(quantize(v, maxval));
  return out;
}

PnmImage from_rgb(const RgbImage& img, int maxval) {
  PnmImage out{img.width(), img.height(), maxval, 3, {}};
  out.samples.reserve(img.size() * 3);
  for (const Rgb& c : img.data())
    for (double v : c) out.samples.push_back(quantize(v, maxval));
  return out;
}

GrayImage read_gray(const std::filesystem::path& path) { return to_gray(read_pnm(path)); }

void write_gray(const std::filesystem::path& path, const GrayImage& img, int maxval) {
  write_pnm(path, from_gray(img, maxval));
}

void write_rgb(const std::filesystem::path& path, const RgbImage& img, int maxval) {
  write_pnm(path, from_rgb(img, maxval));
}

}  // namespace woodfit
