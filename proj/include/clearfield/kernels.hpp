#pragma once

#include "clearfield/image.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>

namespace clearfield {

enum class KernelFamily {
  iso,
  aniso,
  generalized_iso,
  generalized_aniso,
  plateau_iso,
  plateau_aniso,
  sinc,
};

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

struct KernelSpec {
  KernelFamily family = KernelFamily::iso;
  int size = 7;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double rotation = 0.0;
  double beta = 1.0;    // generalized / plateau shape exponent
  double cutoff = 1.0;  // sinc only, radians per pixel

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Square kernel (rows = y offsets, cols = x offsets), non-negative entries
/// summing to 1.
///
/// With q = x^T Sigma^-1 x, Sigma = R diag(sx^2, sy^2) R^T:
///   iso/aniso          exp(-q / 2)
///   generalized        exp(-q^beta / 2)
///   plateau            1 / (1 + q^beta)
///   sinc               wc J1(wc r) / (2 pi r), center wc^2 / (4 pi)
Eigen::MatrixXd build_kernel(const KernelSpec& spec);

/// 2-D correlation of every channel with `kernel`, reflect-101 borders.
ImageBuffer convolve(const ImageBuffer& img, const Eigen::MatrixXd& kernel);

/// Normalized isotropic Gaussian of side 2 * radius + 1.
Eigen::MatrixXd gaussian_kernel(double sigma, int radius);

/// Reflect-101 index into [0, n).
int reflect101(int i, int n);

}  // namespace clearfield
