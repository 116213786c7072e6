#pragma once

// Independent reference implementations shared by unit and acceptance tests.

#include "clearfield/image.hpp"
#include "clearfield/jpeg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace testsupport {

using clearfield::ImageBuffer;
using clearfield::kLumaBaseTable;

// Direct-formula DCT chain for a gray 8x8 block on the 0..255 scale.
inline Eigen::Matrix<double, 8, 8> jpeg_block_oracle(const Eigen::Matrix<double, 8, 8>& gray, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  auto alpha = [](int u) { return u == 0 ? std::sqrt(0.125) : 0.5; };
  Eigen::Matrix<double, 8, 8> coef, out;
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          s += (gray(y, x) * 255.0 - 128.0) * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
               std::cos((2 * y + 1) * v * std::numbers::pi / 16);
      s *= alpha(u) * alpha(v);
      const int q = std::clamp((kLumaBaseTable[v * 8 + u] * scale + 50) / 100, 1, 255);
      coef(v, u) = std::round(s / q) * q;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u)
          s += alpha(u) * alpha(v) * coef(v, u) * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
               std::cos((2 * y + 1) * v * std::numbers::pi / 16);
      out(y, x) = std::clamp((s + 128.0) / 255.0, 0.0, 1.0);
    }
  return out;
}

// Single-scale SSIM summed window by window.
inline double ssim_oracle(const ImageBuffer& a, const ImageBuffer& b) {
  double w[11][11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  for (auto& row : w)
    for (double& v : row) v /= total;
  const double c1 = 0.0001, c2 = 0.0009;
  double sum = 0.0;
  int count = 0;
  for (int c = 0; c < 3; ++c)
    for (int y0 = 0; y0 + 11 <= a.height(); ++y0)
      for (int x0 = 0; x0 + 11 <= a.width(); ++x0) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int j = 0; j < 11; ++j)
          for (int i = 0; i < 11; ++i) {
            const double u = a(x0 + i, y0 + j, c), v = b(x0 + i, y0 + j, c), k = w[j][i];
            ma += k * u;
            mb += k * v;
            aa += k * u * u;
            bb += k * v * v;
            ab += k * u * v;
          }
        const double va = aa - ma * ma, vb = bb - mb * mb, cov = ab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return sum / count;
}

inline double psnr_oracle(const ImageBuffer& a, const ImageBuffer& b) {
  double sum = 0.0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c) sum += (a(x, y, c) - b(x, y, c)) * (a(x, y, c) - b(x, y, c));
  return 10.0 * std::log10(1.0 / (sum / (3.0 * a.width() * a.height())));
}

}  // namespace testsupport
