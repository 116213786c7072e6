#include "clearfield/jpeg.hpp"

#include "clearfield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace clearfield {

const QuantTable kLumaBaseTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

const QuantTable kChromaBaseTable = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,
};

QuantTable scaled_quant_table(const QuantTable& base, int quality) {
  if (quality < 1 || quality > 100) throw ValidationError("JPEG quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  QuantTable out{};
  for (int i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

namespace {

using Block = Eigen::Matrix<double, 8, 8>;

// Orthonormal DCT-II basis: coef = D * block * D^T.
const Block& dct_matrix() {
  static const Block d = [] {
    Block m;
    for (int u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x)
        m(u, x) = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return m;
  }();
  return d;
}

void quantize_plane(std::vector<double>& plane, int w, int h, const QuantTable& table) {
  const Block& d = dct_matrix();
  for (int by = 0; by < h; by += 8) {
    for (int bx = 0; bx < w; bx += 8) {
      Block b;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) b(y, x) = plane[(by + y) * w + bx + x];
      Block coef = d * b * d.transpose();
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const double q = table[y * 8 + x];
          coef(y, x) = std::round(coef(y, x) / q) * q;
        }
      b = d.transpose() * coef * d;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) plane[(by + y) * w + bx + x] = b(y, x);
    }
  }
}

}  // namespace

ImageBuffer jpeg_roundtrip(const ImageBuffer& img, int quality) {
  const QuantTable luma = scaled_quant_table(kLumaBaseTable, quality);
  const QuantTable chroma = scaled_quant_table(kChromaBaseTable, quality);
  const int w = img.width();
  const int h = img.height();
  const int pw = (w + 7) / 8 * 8;
  const int ph = (h + 7) / 8 * 8;

  // level-shifted Y, Cb, Cr planes on the 0..255 scale
  std::vector<double> planes[3];
  for (auto& p : planes) p.resize(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      const Eigen::Vector3d rgb = img.pixel(std::min(x, w - 1), std::min(y, h - 1)) * 255.0;
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      planes[0][i] = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2] - 128.0;
      planes[1][i] = -0.168736 * rgb[0] - 0.331264 * rgb[1] + 0.5 * rgb[2];
      planes[2][i] = 0.5 * rgb[0] - 0.418688 * rgb[1] - 0.081312 * rgb[2];
    }
  }
  quantize_plane(planes[0], pw, ph, luma);
  quantize_plane(planes[1], pw, ph, chroma);
  quantize_plane(planes[2], pw, ph, chroma);

  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      const double luma_v = planes[0][i] + 128.0;
      const double cb = planes[1][i];
      const double cr = planes[2][i];
      out.set_pixel(x, y,
                    Eigen::Vector3d(luma_v + 1.402 * cr, luma_v - 0.344136 * cb - 0.714136 * cr,
                                    luma_v + 1.772 * cb) /
                        255.0);
    }
  }
  return out.clamp();
}

}  // namespace clearfield
