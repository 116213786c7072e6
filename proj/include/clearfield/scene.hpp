#pragma once

#include "clearfield/image.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace clearfield {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Pinhole camera in the Blender convention: the camera looks down its local
/// -Z axis, +Y is up, image rows grow downward. Pixel (i, j) covers
/// [i, i+1) x [j, j+1), so its center sits at (i + 0.5, j + 0.5).
struct CameraView {
  Intrinsics intrinsics;
  Eigen::Matrix4d cam_to_world = Eigen::Matrix4d::Identity();
  std::string image_path;
  double near = 0.1;
  double far = 6.0;
  int width = 0;
  int height = 0;

  Eigen::Vector3d center() const { return cam_to_world.block<3, 1>(0, 3); }
  Eigen::Vector3d forward() const { return -cam_to_world.block<3, 1>(0, 2); }
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = -Eigen::Vector3d::UnitZ();
  double near = 0.0;
  double far = 1.0;
};

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(1.0);

  Eigen::Vector3d extent() const { return max - min; }
  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  friend bool operator==(const Aabb&, const Aabb&) = default;
};

struct SceneSet {
  std::vector<CameraView> views;
  std::vector<ImageBuffer> images;
  Aabb bbox;
  double camera_angle_x = 0.0;

  std::size_t size() const { return views.size(); }
  int width() const { return images.empty() ? 0 : images.front().width(); }
  int height() const { return images.empty() ? 0 : images.front().height(); }

  /// Throws ValidationError unless |views| = |images| >= 1, every image has
  /// the same size and every view is valid.
  void validate() const;
};

/// Throws ValidationError when the rotation block is not orthonormal
/// (tolerance 1e-5) or near/far are out of order.
void validate_view(const CameraView& view);

/// fx = fy = 0.5 * width / tan(camera_angle_x / 2), principal point at the
/// image center.
Intrinsics intrinsics_from_fov(double camera_angle_x, int width, int height);

/// Reads a Blender-style `transforms.json` manifest and every referenced image.
/// `file_path` entries resolve relative to the manifest directory; a missing
/// extension falls back to `.png`.
SceneSet load_scene(const std::filesystem::path& manifest_path);

/// Writes the images as PNGs under `<manifest dir>/<image_dir>/` and the
/// manifest itself. Poses are written with round-trip precision.
void save_scene(const SceneSet& scene, const std::filesystem::path& manifest_path,
                const std::string& image_dir = "images");

/// Same manifest as save_scene but pointing at already-written image paths.
void write_manifest(const SceneSet& scene, const std::filesystem::path& manifest_path,
                    const std::vector<std::string>& image_paths);

/// Ray through the sub-pixel position (u, v); direction is unit length.
Ray camera_ray(const CameraView& view, double u, double v);

}  // namespace clearfield
