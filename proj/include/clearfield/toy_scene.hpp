#pragma once

#include "clearfield/field.hpp"
#include "clearfield/scene.hpp"

#include <Eigen/Core>

#include <filesystem>

namespace clearfield {

struct ToySceneOptions {
  int grid = 64;                 // resolution of the hand-built field
  int width = 128;
  int height = 128;
  int train_views = 16;
  int test_views = 4;
  double camera_distance = 3.6;
  double camera_angle_x = 1.0;
  double near = 1.6;
  double far = 5.2;
  int samples_per_ray = 128;
  /// Ground-truth pixels average a supersample x supersample grid of rays.
  int supersample = 3;
};

struct ToyScene {
  SceneSet train;
  SceneSet test;
  VoxelField field;
};

/// Camera at `eye` looking at `target` with world +Z up (Blender convention).
Eigen::Matrix4d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());

/// Textured spheres and boxes in [-1, 1]^3 on a black background.
VoxelField build_toy_field(int grid);

/// Training cameras circle the scene at two alternating elevations; test
/// cameras sit halfway between them in azimuth.
ToyScene generate_toy_scene(const ToySceneOptions& options = {});

/// Writes `transforms_train.json`, `transforms_test.json`, their images
/// and `gt_field.bin` under `dir`.
void write_toy_scene(const ToyScene& toy, const std::filesystem::path& dir);

/// Renders a view as the average of s x s stratified rays per pixel.
ImageBuffer render_view_antialiased(const VoxelField& field, const CameraView& view, int s,
                                    const RenderOptions& options);

}  // namespace clearfield
