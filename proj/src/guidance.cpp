#include "clearfield/guidance.hpp"

#include "clearfield/errors.hpp"

#include <Eigen/LU>
#include <Eigen/Cholesky>

#include <cmath>
#include <numeric>
#include <string>

namespace clearfield {

PseudoPixelPattern make_pattern(int s, const Eigen::Matrix2d& covariance) {
  if (s < 1) throw ValidationError("pattern side must be >= 1");
  if (!covariance.allFinite() || std::abs(covariance(0, 1) - covariance(1, 0)) > 1e-12)
    throw ValidationError("covariance must be symmetric");
  const Eigen::LLT<Eigen::Matrix2d> llt(covariance);
  if (llt.info() != Eigen::Success || covariance.determinant() <= 1e-300)
    throw ValidationError("covariance must be positive definite");
  const Eigen::Matrix2d inv = covariance.inverse();

  PseudoPixelPattern p;
  p.s = s;
  p.covariance = covariance;
  std::vector<double> raw;
  for (int v = 0; v < s; ++v) {
    for (int u = 0; u < s; ++u) {
      const Eigen::Vector2d off((u + 0.5) / s - 0.5, (v + 0.5) / s - 0.5);
      p.offsets.push_back(off);
      raw.push_back(std::exp(-0.5 * off.dot(inv * off)));
    }
  }
  return with_weights(std::move(p), raw);
}

PseudoPixelPattern with_weights(PseudoPixelPattern pattern, std::span<const double> raw_weights) {
  if (raw_weights.size() != pattern.offsets.size())
    throw ValidationError("one weight per pseudo pixel required");
  const double total = std::accumulate(raw_weights.begin(), raw_weights.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("pattern weights must have a positive sum");
  pattern.weights.resize(raw_weights.size());
  for (std::size_t k = 0; k < raw_weights.size(); ++k) {
    if (!(raw_weights[k] > 0.0)) throw ValidationError("pattern weights must be positive");
    pattern.weights[k] = raw_weights[k] / total;
  }
  return pattern;
}

GuidedLossMode guided_loss_mode_from_string(std::string_view name) {
  if (name == "l1") return GuidedLossMode::l1;
  if (name == "l2") return GuidedLossMode::l2;
  throw ValidationError("guided loss must be l1 or l2, got '" + std::string(name) + "'");
}

std::string_view to_string(GuidedLossMode mode) { return mode == GuidedLossMode::l1 ? "l1" : "l2"; }

Eigen::Vector3d render_pixel_supersampled(const VoxelField& field, const CameraView& view,
                                          PixelCoord pixel, const PseudoPixelPattern& pattern,
                                          const RenderOptions& options) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    const Ray ray = camera_ray(view, pixel.x + 0.5 + pattern.offsets[k].x(),
                               pixel.y + 0.5 + pattern.offsets[k].y());
    const RaySampleSet samples = sample_ray(ray, options.samples_per_ray);
    out += pattern.weights[k] *
           render_ray(field, samples, options.background, options.min_transmittance).color;
  }
  return out;
}

double guided_loss(const ImageBuffer& rendered, const ImageBuffer& target, GuidedLossMode mode) {
  if (!rendered.same_shape(target)) throw ValidationError("guided loss requires equal shapes");
  if (rendered.empty()) return 0.0;
  const Eigen::ArrayXd diff = rendered.array() - target.array();
  return mode == GuidedLossMode::l1 ? diff.abs().mean() : diff.square().mean();
}

double pixel_loss(const Eigen::Vector3d& rendered, const Eigen::Vector3d& target, GuidedLossMode mode,
                  Eigen::Vector3d* dloss_drendered) {
  const Eigen::Vector3d diff = rendered - target;
  if (mode == GuidedLossMode::l2) {
    if (dloss_drendered) *dloss_drendered = 2.0 * diff;
    return diff.squaredNorm();
  }
  if (dloss_drendered)
    *dloss_drendered = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
  return diff.cwiseAbs().sum();
}

SupersampledBatchResult backward_supersampled(const VoxelField& field, const CameraView& view,
                                              std::span<const PixelCoord> pixels,
                                              const PseudoPixelPattern& pattern,
                                              std::span<const Eigen::Vector3d> targets,
                                              const RenderOptions& options, GuidedLossMode mode) {
  if (pixels.size() != targets.size()) throw ValidationError("one target color per pixel required");
  SupersampledBatchResult out;
  out.gradient = FieldGradient(field);
  if (pixels.empty()) return out;
  const double norm = 1.0 / (3.0 * static_cast<double>(pixels.size()));
  std::vector<RayTrace> traces(pattern.size());
  for (std::size_t p = 0; p < pixels.size(); ++p) {
    Eigen::Vector3d blended = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < pattern.size(); ++k) {
      const Ray ray = camera_ray(view, pixels[p].x + 0.5 + pattern.offsets[k].x(),
                                 pixels[p].y + 0.5 + pattern.offsets[k].y());
      const RaySampleSet samples = sample_ray(ray, options.samples_per_ray);
      blended += pattern.weights[k] *
                 trace_ray(field, samples, options.background, options.min_transmittance, traces[k])
                     .color;
    }
    Eigen::Vector3d grad;
    const double l = pixel_loss(blended, targets[p], mode, &grad);
    out.loss += l * norm;
    out.pixel_losses.push_back(l / 3.0);
    for (std::size_t k = 0; k < pattern.size(); ++k)
      backprop_ray(traces[k], (pattern.weights[k] * norm) * grad, out.gradient);
  }
  return out;
}

}  // namespace clearfield
