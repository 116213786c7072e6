#pragma once

#include "clearfield/field.hpp"
#include "clearfield/image.hpp"
#include "clearfield/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace clearfield {

/// 10 log10(1 / MSE) over all channels; +infinity for identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, valid windows only, averaged over pixels and channels.
/// Requires min(width, height) >= 11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct EvalReport {
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::int64_t rays_used = 0;
  std::optional<double> train_seconds;

  /// Recompute the means from the per-view entries.
  void finalize();
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Renders every view of `holdout` and scores it against the stored image.
EvalReport evaluate(const VoxelField& field, const SceneSet& holdout, const RenderOptions& options = {});

}  // namespace clearfield
