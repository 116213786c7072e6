#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace clearfield {

template <typename Scalar>
using Rgb = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
struct Composite {
  Rgb<Scalar> color = Rgb<Scalar>::Zero();
  Scalar transmittance = Scalar(1);  // after the last sample
};

/// Alpha compositing along one ray:
///   C = sum_k T_k (1 - exp(-sigma_k delta_k)) c_k + T_{K+1} c_bg,
///   T_k = exp(-sum_{j<k} sigma_j delta_j).
template <typename Scalar>
Composite<Scalar> composite(std::span<const Scalar> sigma, std::span<const Scalar> delta,
                            std::span<const Rgb<Scalar>> color, const Rgb<Scalar>& background) {
  Composite<Scalar> out;
  Scalar t = Scalar(1);
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    const Scalar a = std::exp(-sigma[k] * delta[k]);
    out.color += (t * (Scalar(1) - a)) * color[k];
    t *= a;
  }
  out.transmittance = t;
  out.color += t * background;
  return out;
}

/// Gradients of a scalar loss through `composite`, given dL/dC.
/// Writes dL/dsigma_k and dL/dc_k. `transmittance` must be the T_k sequence
/// (T_1 .. T_{K+1}, size K + 1) produced by the forward pass.
template <typename Scalar>
void composite_backward(std::span<const Scalar> sigma, std::span<const Scalar> delta,
                        std::span<const Rgb<Scalar>> color, std::span<const Scalar> transmittance,
                        const Rgb<Scalar>& background, const Rgb<Scalar>& dloss_dcolor,
                        std::span<Scalar> dloss_dsigma, std::span<Rgb<Scalar>> dloss_dc) {
  const std::size_t n = sigma.size();
  // suffix = sum_{j>k} w_j (c_j . g) + T_{K+1} (c_bg . g)
  Scalar suffix = transmittance[n] * background.dot(dloss_dcolor);
  for (std::size_t k = n; k-- > 0;) {
    const Scalar w = transmittance[k] - transmittance[k + 1];
    const Scalar cg = color[k].dot(dloss_dcolor);
    dloss_dc[k] = w * dloss_dcolor;
    dloss_dsigma[k] = delta[k] * (transmittance[k + 1] * cg - suffix);
    suffix += w * cg;
  }
}

template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(30) ? x : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Inverse of softplus, for initialization.
template <typename Scalar>
Scalar softplus_inverse(Scalar y) {
  return y > Scalar(30) ? y : std::log(std::expm1(y));
}

template <typename Scalar>
Scalar logit(Scalar p) {
  return std::log(p / (Scalar(1) - p));
}

}  // namespace clearfield
