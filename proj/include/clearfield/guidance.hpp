#pragma once

#include "clearfield/field.hpp"

#include <Eigen/Core>

#include <span>
#include <string_view>
#include <vector>

namespace clearfield {

/// s x s sub-pixel ray offsets with normalized bivariate-normal weights.
struct PseudoPixelPattern {
  int s = 1;
  std::vector<Eigen::Vector2d> offsets;  // ((u + 0.5) / s - 0.5, (v + 0.5) / s - 0.5)
  std::vector<double> weights;           // sum to 1
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();

  std::size_t size() const { return offsets.size(); }
};

/// weight_k proportional to exp(-0.5 offset_k^T cov^-1 offset_k), normalized.
/// Throws ValidationError for s < 1 or a covariance that is not symmetric
/// positive definite.
PseudoPixelPattern make_pattern(int s, const Eigen::Matrix2d& covariance);

/// Same offsets, user-supplied unnormalized weights (renormalized here).
PseudoPixelPattern with_weights(PseudoPixelPattern pattern, std::span<const double> raw_weights);

enum class GuidedLossMode { l1, l2 };

GuidedLossMode guided_loss_mode_from_string(std::string_view name);
std::string_view to_string(GuidedLossMode mode);

struct PixelCoord {
  int x = 0;
  int y = 0;
};

/// Weighted blend of one ray per pseudo pixel, each cast through
/// (x + 0.5 + dx, y + 0.5 + dy). Deterministic midpoint sampling.
Eigen::Vector3d render_pixel_supersampled(const VoxelField& field, const CameraView& view,
                                          PixelCoord pixel, const PseudoPixelPattern& pattern,
                                          const RenderOptions& options = {});

/// Mean absolute (l1) or mean squared (l2) per-channel deviation.
double guided_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                   GuidedLossMode mode = GuidedLossMode::l2);

/// Per-pixel loss term and its derivative with respect to the blended color,
/// before the 1 / (3 * pixels) normalization.
double pixel_loss(const Eigen::Vector3d& rendered, const Eigen::Vector3d& target, GuidedLossMode mode,
                  Eigen::Vector3d* dloss_drendered = nullptr);

struct SupersampledBatchResult {
  double loss = 0.0;
  std::vector<double> pixel_losses;  // mean over channels, per pixel
  FieldGradient gradient;
};

/// guided_loss over a batch of pixels of one view with exact gradients.
/// Pseudo ray k receives w_k times the pixel's color gradient.
SupersampledBatchResult backward_supersampled(const VoxelField& field, const CameraView& view,
                                              std::span<const PixelCoord> pixels,
                                              const PseudoPixelPattern& pattern,
                                              std::span<const Eigen::Vector3d> targets,
                                              const RenderOptions& options,
                                              GuidedLossMode mode = GuidedLossMode::l2);

}  // namespace clearfield
