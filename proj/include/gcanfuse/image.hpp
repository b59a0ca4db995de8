#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace gcanfuse {

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return rgb[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return rgb[(y * width + x) * 3 + c];
  }
  bool empty() const { return width == 0 || height == 0; }
};

/// Channel-major 3 x side x side tensor.
struct ImageTensor {
  std::size_t side = 0;
  std::vector<double> values;

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values[(c * side + y) * side + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * side + y) * side + x];
  }
};

inline void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
}

inline RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read image " + path);
  auto next_field = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_field() != "P6") throw DataError(path + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_field());
    h = std::stoul(next_field());
    maxval = std::stoul(next_field());
  } catch (const std::exception&) {
    throw DataError(path + ": malformed PPM header");
  }
  if (maxval != 255) throw DataError(path + ": only 8-bit PPM supported");
  if (w == 0 || h == 0) throw DataError(path + ": degenerate image dimensions");
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.rgb.size())
    throw DataError(path + ": truncated pixel data");
  return img;
}

// Bilinear resampling, half-pixel centres: output pixel i samples source
// coordinate (i + 0.5) * in / out - 0.5, clamped to [0, in - 1]; the two
// neighbours floor(s) and floor(s) + 1 (clamped) are blended by frac(s).
// Rows and columns are interpolated jointly, channels independently.
inline std::vector<double> resize_bilinear(const RgbImage& img, std::size_t out_side) {
  std::vector<double> out(out_side * out_side * 3);
  // a + f * (b - a) is exact when a == b, so flat regions stay flat.
  auto lerp = [](double a, double b, double f) { return a + f * (b - a); };
  auto coord = [](std::size_t i, std::size_t in_n, std::size_t out_n) {
    double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in_n) /
                   static_cast<double>(out_n) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in_n - 1));
  };
  for (std::size_t y = 0; y < out_side; ++y) {
    double sy = coord(y, img.height, out_side);
    std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
    std::size_t y1 = std::min(y0 + 1, img.height - 1);
    double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_side; ++x) {
      double sx = coord(x, img.width, out_side);
      std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
      std::size_t x1 = std::min(x0 + 1, img.width - 1);
      double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        double top = lerp(img.at(y0, x0, c), img.at(y0, x1, c), fx);
        double bot = lerp(img.at(y1, x0, c), img.at(y1, x1, c), fx);
        out[(y * out_side + x) * 3 + c] = lerp(top, bot, fy);
      }
    }
  }
  return out;
}

/// Resize to resize_side, centre-crop crop_side, scale to [0,1] and
/// standardize with the per-image mean and standard deviation over all
/// 3 * crop_side^2 values. A constant image has zero variance and is divided
/// by 1, giving all zeros.
inline ImageTensor normalize_image(const RgbImage& img, std::size_t resize_side,
                                   std::size_t crop_side) {
  if (img.empty() || img.rgb.size() != img.width * img.height * 3)
    throw DataError("normalize_image: degenerate image dimensions");
  if (crop_side == 0 || crop_side > resize_side)
    throw UsageError("normalize_image: crop side must be in [1, resize side]");

  std::vector<double> resized = resize_bilinear(img, resize_side);
  std::size_t off = (resize_side - crop_side) / 2;

  ImageTensor t;
  t.side = crop_side;
  t.values.resize(3 * crop_side * crop_side);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < crop_side; ++y)
      for (std::size_t x = 0; x < crop_side; ++x)
        t.at(c, y, x) =
            resized[((y + off) * resize_side + (x + off)) * 3 + c] / 255.0;

  const double n = static_cast<double>(t.values.size());
  double mean = 0;
  for (double v : t.values) mean += v;
  mean /= n;
  double var = 0;
  for (double v : t.values) var += (v - mean) * (v - mean);
  var /= n;
  // Rounding in the mean leaves a ~1e-17 spread on flat images; treat it as flat.
  const double sd = std::sqrt(var);
  if (sd < 1e-9) {
    std::fill(t.values.begin(), t.values.end(), 0.0);
    return t;
  }
  for (double& v : t.values) v = (v - mean) / sd;
  return t;
}

}  // namespace gcanfuse
