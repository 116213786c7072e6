#pragma once

#include "clearfield/compositing.hpp"
#include "clearfield/image.hpp"
#include "clearfield/rng.hpp"
#include "clearfield/scene.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace clearfield {

/// Explicit radiance field on a vertex-aligned grid: grid point (x, y, z)
/// sits at bbox.min + (x, y, z) * extent / (resolution - 1). Stores
/// pre-activation values; density = softplus(raw), color = logistic(raw).
class VoxelField {
 public:
  VoxelField() = default;
  VoxelField(const Eigen::Vector3i& resolution, const Aabb& bbox, double init_density = 0.1,
             double init_color = 0.5);

  const Eigen::Vector3i& resolution() const { return resolution_; }
  const Aabb& bbox() const { return bbox_; }
  std::size_t voxel_count() const { return density_raw_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * resolution_.y() + y) * resolution_.x() + x;
  }
  Eigen::Vector3d grid_point(int x, int y, int z) const;

  std::span<double> density_raw() { return density_raw_; }
  std::span<const double> density_raw() const { return density_raw_; }
  /// Interleaved RGB, 3 * voxel_count values.
  std::span<double> color_raw() { return color_raw_; }
  std::span<const double> color_raw() const { return color_raw_; }

  friend bool operator==(const VoxelField&, const VoxelField&) = default;

 private:
  Eigen::Vector3i resolution_ = Eigen::Vector3i::Zero();
  Aabb bbox_;
  std::vector<double> density_raw_;
  std::vector<double> color_raw_;
};

/// Eight grid corners and trilinear weights around a point.
struct TrilinearStencil {
  std::array<std::size_t, 8> index{};
  std::array<double, 8> weight{};
};

/// False when x lies outside the bbox.
bool trilinear_stencil(const VoxelField& field, const Eigen::Vector3d& x, TrilinearStencil& out);

struct FieldSample {
  double sigma = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);
};

/// Density and color at x. The view direction is accepted for interface
/// parity but the field is view-independent. Outside the bbox: sigma = 0,
/// color = 0.5.
FieldSample query_field(const VoxelField& field, const Eigen::Vector3d& x,
                        const Eigen::Vector3d& direction = Eigen::Vector3d::Zero());

struct RaySampleSet {
  Ray ray;
  std::vector<double> t;       // distances along the ray
  std::vector<double> deltas;  // interval lengths

  Eigen::Vector3d position(std::size_t k) const { return ray.origin + t[k] * ray.direction; }
  std::size_t size() const { return t.size(); }
};

/// K stratified samples over [near, far]: segment k is
/// [near + k D, near + (k + 1) D), D = (far - near) / K, and every delta is D.
/// Without rng the segment midpoints are used; with rng one uniform draw per
/// segment.
RaySampleSet sample_ray(const Ray& ray, int samples, Rng* rng = nullptr);

struct RenderOptions {
  int samples_per_ray = 128;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  /// Stop marching once transmittance drops below this; 0 marches every sample.
  double min_transmittance = 0.0;
};

struct RayRender {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double transmittance = 1.0;
};

RayRender render_ray(const VoxelField& field, const RaySampleSet& samples,
                     const Eigen::Vector3d& background = Eigen::Vector3d::Zero(),
                     double min_transmittance = 0.0);

/// Dense gradient buffers shaped like the field's raw arrays.
struct FieldGradient {
  std::vector<double> density;
  std::vector<double> color;

  FieldGradient() = default;
  explicit FieldGradient(const VoxelField& field)
      : density(field.voxel_count(), 0.0), color(3 * field.voxel_count(), 0.0) {}

  void zero();
  FieldGradient& operator+=(const FieldGradient& other);
};

/// Forward record of one ray, kept for the backward pass. Only samples
/// inside the bbox are stored; the rest have zero density and drop out of
/// the compositing sum.
struct RayTrace {
  std::vector<TrilinearStencil> stencils;
  std::vector<double> density_raw;
  std::vector<double> sigma;
  std::vector<double> delta;
  std::vector<Eigen::Vector3d> color_raw;
  std::vector<Eigen::Vector3d> color;
  std::vector<double> transmittance;  // size + 1 entries
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  RayRender result;

  void clear();
};

/// Forward pass that keeps everything backprop_ray needs.
const RayRender& trace_ray(const VoxelField& field, const RaySampleSet& samples,
                           const Eigen::Vector3d& background, double min_transmittance,
                           RayTrace& trace);

/// Adds dL/draw to `grad` for a traced ray given dL/dC.
void backprop_ray(const RayTrace& trace, const Eigen::Vector3d& dloss_dcolor, FieldGradient& grad);

/// Mean squared per-channel difference.
double reconstruction_loss(const ImageBuffer& rendered, const ImageBuffer& target);

struct RayBatchResult {
  double loss = 0.0;
  FieldGradient gradient;
};

/// Loss = mean over rays and channels of (C(ray) - target)^2, with exact
/// gradients over the raw grids. Deterministic midpoint sampling.
RayBatchResult backward_rays(const VoxelField& field, std::span<const Ray> rays,
                             std::span<const Eigen::Vector3d> targets, const RenderOptions& options);

/// One deterministic center ray per pixel, output clamped to [0, 1].
ImageBuffer render_view(const VoxelField& field, const CameraView& view,
                        const RenderOptions& options = {});

/// Binary field file: "CFVF" magic, u32 version, i32 resolution[3],
/// f32 bbox[6], then f32 density[N] and f32 color[3N], all little-endian.
void save_field(const VoxelField& field, const std::filesystem::path& path);
VoxelField load_field(const std::filesystem::path& path);

}  // namespace clearfield
