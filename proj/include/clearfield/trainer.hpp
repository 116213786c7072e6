#pragma once

#include "clearfield/field.hpp"
#include "clearfield/guidance.hpp"
#include "clearfield/quadtree.hpp"
#include "clearfield/scene.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace clearfield {

struct TrainConfig {
  Eigen::Vector3i resolution = Eigen::Vector3i::Constant(64);
  double lr_density = 0.1;
  double lr_color = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Cosine annealing from lr to lr * lr_final_factor over the whole run.
  double lr_final_factor = 0.1;
  int batch_rays = 8192;
  int coarse_epochs = 2;
  int fine_epochs = 6;
  int samples_per_ray = 128;
  bool stratified = true;
  double init_density = 0.1;
  double init_color = 0.5;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  double min_transmittance = 1e-4;
  std::uint64_t seed = 0;

  RenderOptions render_options() const { return {samples_per_ray, background, min_transmittance}; }
  /// Throws ValidationError on non-positive counts or betas outside (0, 1).
  void validate() const;
};

struct GuidanceConfig {
  int s = 2;
  Eigen::Matrix2d covariance = Eigen::Vector2d(0.09, 0.09).asDiagonal();
  GuidedLossMode loss = GuidedLossMode::l2;
  /// First fine-stage epoch (relative) that supersamples.
  int start_epoch = 0;
};

/// Adam over flat parameter arrays.
class Adam {
 public:
  Adam(std::size_t size, double beta1, double beta2, double epsilon);

  /// One bias-corrected update of `params` with `grad` at learning rate lr.
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::int64_t steps() const { return steps_; }

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  std::int64_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// lr * (f + (1 - f) * 0.5 * (1 + cos(pi * progress))), progress in [0, 1].
double cosine_lr(double lr, double final_factor, double progress);

struct EpochLog {
  int epoch = 0;
  bool fine = false;
  bool supersampled = false;
  double loss = 0.0;
  std::int64_t pixels = 0;
  std::int64_t rays_used = 0;
  std::int64_t iterations = 0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;

  std::int64_t total_rays() const;
  std::int64_t fine_rays() const;
  std::int64_t total_iterations() const;
  double total_seconds() const;
};

struct TrainResult {
  VoxelField field;
  TrainLog log;
  std::vector<Quadtree> trees;  // empty unless quadtree planning ran
};

/// Coarse stage: one center ray per pixel over every pixel of every view,
/// shuffled, in batches of batch_rays. Fine stage: with guidance, each pixel
/// is supersampled with the pseudo-pixel pattern (batch_rays / s^2 pixels per
/// step) and, with a quadtree config, each epoch trains on a quadtree plan
/// instead of all pixels. Quadtree planning requires guidance.
TrainResult train(const SceneSet& scene, const TrainConfig& config,
                  const std::optional<GuidanceConfig>& guidance = std::nullopt,
                  const std::optional<QuadtreeSettings>& quadtree = std::nullopt);

}  // namespace clearfield
