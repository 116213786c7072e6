#pragma once

#include "clearfield/field.hpp"
#include "clearfield/guidance.hpp"
#include "clearfield/image.hpp"
#include "clearfield/rng.hpp"
#include "clearfield/scene.hpp"
#include "clearfield/toy_scene.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace testsupport {

using namespace clearfield;

inline std::filesystem::path data_dir() { return CLEARFIELD_TEST_DATA; }

inline const std::vector<std::string>& texture_names() {
  static const std::vector<std::string> names{"texture_checker.png", "texture_noise.png", "texture_rings.png",
                                              "texture_stripes.png", "texture_scene.png"};
  return names;
}

inline ImageBuffer random_image(int w, int h, Rng& rng) {
  ImageBuffer img(w, h);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("clearfield_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline CameraView looking_at_origin(const Eigen::Vector3d& eye, int w, int h, double fov = 0.6, double near = 1.0,
                                    double far = 5.0) {
  CameraView v;
  v.cam_to_world = look_at(eye, Eigen::Vector3d::Zero());
  v.intrinsics = intrinsics_from_fov(fov, w, h);
  v.width = w;
  v.height = h;
  v.near = near;
  v.far = far;
  return v;
}

inline VoxelField random_field(int n, Rng& rng) {
  VoxelField f(Eigen::Vector3i::Constant(n), Aabb{});
  for (double& d : f.density_raw()) d = rng.uniform(-1.0, 1.5);
  for (double& c : f.color_raw()) c = rng.uniform(-2.0, 2.0);
  return f;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  int checked = 0;
};

/// Central differences (step h) of `loss(field)` against `analytic`, over
/// every coordinate whose analytic or numeric gradient exceeds 1e-8.
template <typename LossFn>
GradientCheck check_gradient(VoxelField field, const FieldGradient& analytic, LossFn&& loss, double h = 1e-4) {
  GradientCheck out;
  auto probe = [&](std::span<double> params, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      const double up = loss(field);
      params[i] = saved - h;
      const double down = loss(field);
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max(std::abs(numeric), std::abs(grad[i]));
      if (scale <= 1e-8) continue;
      ++out.checked;
      out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - grad[i]) / scale);
    }
  };
  probe(field.density_raw(), analytic.density);
  probe(field.color_raw(), analytic.color);
  return out;
}

/// 4^3 random field seen by a 2x2 camera, 8 samples per ray.
struct TinyProblem {
  VoxelField field;
  CameraView view;
  std::vector<PixelCoord> pixels;
  std::vector<Ray> rays;
  std::vector<Eigen::Vector3d> targets;
  RenderOptions options;
};

inline TinyProblem tiny_problem(std::uint64_t seed) {
  Rng rng(seed);
  TinyProblem p;
  p.field = random_field(4, rng);
  const Eigen::Vector3d eye(rng.uniform(2.0, 3.0), rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5));
  p.view = looking_at_origin(eye, 2, 2, 0.5, 1.0, 5.0);
  p.options.samples_per_ray = 8;
  p.options.background = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      p.pixels.push_back({x, y});
      p.rays.push_back(camera_ray(p.view, x + 0.5, y + 0.5));
      p.targets.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    }
  }
  return p;
}

inline GradientCheck plain_gradient_check(std::uint64_t seed) {
  const TinyProblem p = tiny_problem(seed);
  const RayBatchResult r = backward_rays(p.field, p.rays, p.targets, p.options);
  return check_gradient(p.field, r.gradient, [&](const VoxelField& f) {
    return backward_rays(f, p.rays, p.targets, p.options).loss;
  });
}

inline GradientCheck supersampled_gradient_check(std::uint64_t seed, int s, GuidedLossMode mode = GuidedLossMode::l2) {
  const TinyProblem p = tiny_problem(seed);
  const PseudoPixelPattern pattern = make_pattern(s, Eigen::Vector2d(0.09, 0.09).asDiagonal());
  const auto r = backward_supersampled(p.field, p.view, p.pixels, pattern, p.targets, p.options, mode);
  return check_gradient(p.field, r.gradient, [&](const VoxelField& f) {
    return backward_supersampled(f, p.view, p.pixels, pattern, p.targets, p.options, mode).loss;
  });
}

}  // namespace testsupport
