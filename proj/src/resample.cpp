#include "clearfield/resample.hpp"

#include "clearfield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace clearfield {

namespace {

struct Tap {
  int index;
  double weight;
};

// Per output coordinate, the source taps and weights along one axis.
using AxisTaps = std::vector<std::vector<Tap>>;

AxisTaps area_taps(int in, int out) {
  AxisTaps taps(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * ratio;
    const double hi = (o + 1) * ratio;
    for (int i = static_cast<int>(std::floor(lo)); i < static_cast<int>(std::ceil(hi)); ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) taps[o].push_back({std::min(i, in - 1), overlap / ratio});
    }
  }
  return taps;
}

double cubic(double x) {
  constexpr double a = -0.75;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

AxisTaps interp_taps(int in, int out, bool bicubic) {
  AxisTaps taps(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double src = (o + 0.5) * ratio - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const double t = src - base;
    if (bicubic) {
      for (int k = -1; k <= 2; ++k)
        taps[o].push_back({std::clamp(base + k, 0, in - 1), cubic(t - k)});
    } else {
      taps[o].push_back({std::clamp(base, 0, in - 1), 1.0 - t});
      taps[o].push_back({std::clamp(base + 1, 0, in - 1), t});
    }
  }
  return taps;
}

AxisTaps axis_taps(int in, int out, ResizeMode mode) {
  switch (mode) {
    case ResizeMode::area:
      return area_taps(in, out);
    case ResizeMode::bilinear:
      return interp_taps(in, out, false);
    case ResizeMode::bicubic:
      return interp_taps(in, out, true);
  }
  return {};
}

}  // namespace

std::string_view to_string(ResizeMode mode) {
  switch (mode) {
    case ResizeMode::area:
      return "area";
    case ResizeMode::bilinear:
      return "bilinear";
    case ResizeMode::bicubic:
      return "bicubic";
  }
  return "unknown";
}

ResizeMode resize_mode_from_string(std::string_view name) {
  if (name == "area") return ResizeMode::area;
  if (name == "bilinear") return ResizeMode::bilinear;
  if (name == "bicubic") return ResizeMode::bicubic;
  throw ValidationError("unknown resize mode '" + std::string(name) + "'");
}

int scaled_size(int side, double scale) {
  return std::max(1, static_cast<int>(std::lround(side * scale)));
}

ImageBuffer resize(const ImageBuffer& img, double scale, ResizeMode mode) {
  if (!(scale > 0.0)) throw ValidationError("resize scale must be positive");
  return resize_to(img, scaled_size(img.width(), scale), scaled_size(img.height(), scale), mode);
}

ImageBuffer resize_to(const ImageBuffer& img, int width, int height, ResizeMode mode) {
  if (width < 1 || height < 1) throw ValidationError("resize target must be at least 1x1");
  if (width == img.width() && height == img.height()) return img;

  const AxisTaps xt = axis_taps(img.width(), width, mode);
  const AxisTaps yt = axis_taps(img.height(), height, mode);

  // separable: rows first, then columns
  ImageBuffer tmp(width, img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < width; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (const Tap& t : xt[x]) acc += t.weight * img.pixel(t.index, y);
      tmp.set_pixel(x, y, acc);
    }
  ImageBuffer out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (const Tap& t : yt[y]) acc += t.weight * tmp.pixel(x, t.index);
      out.set_pixel(x, y, acc);
    }
  return out.clamp();
}

}  // namespace clearfield
