#include "clearfield/kernels.hpp"

#include "clearfield/errors.hpp"

#include <Eigen/LU>
#include <array>
#include <cmath>
#include <numbers>
#include <utility>

namespace clearfield {

namespace {

constexpr std::array<std::pair<KernelFamily, std::string_view>, 7> kFamilyNames{{
    {KernelFamily::iso, "iso"},
    {KernelFamily::aniso, "aniso"},
    {KernelFamily::generalized_iso, "generalized_iso"},
    {KernelFamily::generalized_aniso, "generalized_aniso"},
    {KernelFamily::plateau_iso, "plateau_iso"},
    {KernelFamily::plateau_aniso, "plateau_aniso"},
    {KernelFamily::sinc, "sinc"},
}};

Eigen::MatrixXd sinc_kernel(int size, double cutoff) {
  const int r = size / 2;
  Eigen::MatrixXd k(size, size);
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double dist = std::hypot(x, y);
      k(y + r, x + r) = dist == 0.0
                            ? cutoff * cutoff / (4.0 * std::numbers::pi)
                            : cutoff * std::cyl_bessel_j(1.0, cutoff * dist) /
                                  (2.0 * std::numbers::pi * dist);
    }
  }
  return k;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  for (const auto& [f, name] : kFamilyNames)
    if (f == family) return name;
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames)
    if (n == name) return f;
  throw ValidationError("unknown kernel family '" + std::string(name) + "'");
}

Eigen::MatrixXd build_kernel(const KernelSpec& spec) {
  if (spec.size < 1 || spec.size % 2 == 0) throw ValidationError("kernel size must be odd");

  Eigen::MatrixXd k;
  if (spec.family == KernelFamily::sinc) {
    if (!(spec.cutoff > 0.0)) throw ValidationError("sinc cutoff must be positive");
    k = sinc_kernel(spec.size, spec.cutoff);
    // The ideal low-pass has negative lobes; the realized blur is kept
    // non-negative.
    k = k.cwiseMax(0.0);
  } else {
    if (!(spec.sigma_x > 0.0) || !(spec.sigma_y > 0.0))
      throw ValidationError("kernel sigma must be positive");
    const bool isotropic = spec.family == KernelFamily::iso ||
                           spec.family == KernelFamily::generalized_iso ||
                           spec.family == KernelFamily::plateau_iso;
    const double sy = isotropic ? spec.sigma_x : spec.sigma_y;
    const double theta = isotropic ? 0.0 : spec.rotation;
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const Eigen::Matrix2d cov =
        rot * Eigen::Vector2d(spec.sigma_x * spec.sigma_x, sy * sy).asDiagonal() * rot.transpose();
    const Eigen::Matrix2d inv_cov = cov.inverse();

    const int r = spec.size / 2;
    k.resize(spec.size, spec.size);
    for (int y = -r; y <= r; ++y) {
      for (int x = -r; x <= r; ++x) {
        const Eigen::Vector2d d(x, y);
        const double q = d.dot(inv_cov * d);
        double v = 0.0;
        switch (spec.family) {
          case KernelFamily::iso:
          case KernelFamily::aniso:
            v = std::exp(-0.5 * q);
            break;
          case KernelFamily::generalized_iso:
          case KernelFamily::generalized_aniso:
            v = std::exp(-0.5 * std::pow(q, spec.beta));
            break;
          case KernelFamily::plateau_iso:
          case KernelFamily::plateau_aniso:
            v = 1.0 / (1.0 + std::pow(q, spec.beta));
            break;
          case KernelFamily::sinc:
            break;
        }
        k(y + r, x + r) = v;
      }
    }
  }
  const double total = k.sum();
  if (!(total > 0.0)) throw ValidationError("degenerate kernel");
  return k / total;
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

ImageBuffer convolve(const ImageBuffer& img, const Eigen::MatrixXd& kernel) {
  const int w = img.width();
  const int h = img.height();
  const int ry = static_cast<int>(kernel.rows()) / 2;
  const int rx = static_cast<int>(kernel.cols()) / 2;
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int ky = 0; ky < kernel.rows(); ++ky) {
        const int sy = reflect101(y + ky - ry, h);
        for (int kx = 0; kx < kernel.cols(); ++kx) {
          acc += kernel(ky, kx) * img.pixel(reflect101(x + kx - rx, w), sy);
        }
      }
      out.set_pixel(x, y, acc);
    }
  }
  return out;
}

Eigen::MatrixXd gaussian_kernel(double sigma, int radius) {
  KernelSpec spec;
  spec.family = KernelFamily::iso;
  spec.size = 2 * radius + 1;
  spec.sigma_x = spec.sigma_y = sigma;
  return build_kernel(spec);
}

}  // namespace clearfield
