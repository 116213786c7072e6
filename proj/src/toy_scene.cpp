#include "clearfield/toy_scene.hpp"

#include "clearfield/errors.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

namespace clearfield {

namespace {

constexpr double kSolidDensity = 40.0;
constexpr double kEmptyDensity = 1e-4;

struct Hit {
  bool inside = false;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

Hit shade(const Eigen::Vector3d& p) {
  // striped sphere
  {
    const Eigen::Vector3d c(-0.35, -0.2, -0.1);
    if ((p - c).norm() <= 0.38) {
      const bool stripe = static_cast<int>(std::floor((p.z() - c.z()) * 10.0)) % 2 == 0;
      return {true, stripe ? Eigen::Vector3d(0.9, 0.15, 0.1) : Eigen::Vector3d(0.95, 0.85, 0.2)};
    }
  }
  // checkered box
  {
    const Eigen::Vector3d c(0.35, 0.25, 0.05);
    const Eigen::Vector3d half(0.25, 0.25, 0.3);
    if (((p - c).cwiseAbs().array() <= half.array()).all()) {
      const Eigen::Vector3d q = (p - c + half) * 6.0;
      const int parity = static_cast<int>(std::floor(q.x()) + std::floor(q.y()) + std::floor(q.z())) & 1;
      return {true, parity ? Eigen::Vector3d(0.1, 0.3, 0.85) : Eigen::Vector3d(0.9, 0.9, 0.9)};
    }
  }
  // small smooth sphere
  {
    const Eigen::Vector3d c(0.1, -0.45, 0.35);
    if ((p - c).norm() <= 0.2) return {true, Eigen::Vector3d(0.2, 0.75, 0.3)};
  }
  // flat slab underneath with a soft gradient
  if (std::abs(p.z() + 0.55) <= 0.06 && std::abs(p.x()) <= 0.8 && std::abs(p.y()) <= 0.8) {
    const double t = 0.5 + 0.5 * p.x() / 0.8;
    return {true, Eigen::Vector3d(0.45 + 0.3 * t, 0.4, 0.6 - 0.3 * t)};
  }
  return {};
}

}  // namespace

Eigen::Matrix4d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d back = (eye - target).normalized();
  const Eigen::Vector3d right = up.cross(back).normalized();
  const Eigen::Vector3d cam_up = back.cross(right);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 0) = right;
  m.block<3, 1>(0, 1) = cam_up;
  m.block<3, 1>(0, 2) = back;
  m.block<3, 1>(0, 3) = eye;
  return m;
}

VoxelField build_toy_field(int grid) {
  VoxelField field(Eigen::Vector3i::Constant(grid), Aabb{});
  auto density = field.density_raw();
  auto color = field.color_raw();
  for (int z = 0; z < grid; ++z) {
    for (int y = 0; y < grid; ++y) {
      for (int x = 0; x < grid; ++x) {
        const std::size_t i = field.index(x, y, z);
        const Hit h = shade(field.grid_point(x, y, z));
        density[i] = softplus_inverse(h.inside ? kSolidDensity : kEmptyDensity);
        for (int c = 0; c < 3; ++c)
          color[3 * i + c] = logit(std::clamp(h.inside ? h.color[c] : 0.5, 0.02, 0.98));
      }
    }
  }
  return field;
}

ImageBuffer render_view_antialiased(const VoxelField& field, const CameraView& view, int s,
                                    const RenderOptions& options) {
  ImageBuffer img(view.width, view.height);
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int v = 0; v < s; ++v)
        for (int u = 0; u < s; ++u) {
          const Ray ray = camera_ray(view, x + (u + 0.5) / s, y + (v + 0.5) / s);
          acc += render_ray(field, sample_ray(ray, options.samples_per_ray), options.background,
                            options.min_transmittance)
                     .color;
        }
      img.set_pixel(x, y, acc / (s * s));
    }
  }
  return img.clamp();
}

ToyScene generate_toy_scene(const ToySceneOptions& o) {
  if (o.train_views < 1 || o.test_views < 1 || o.supersample < 1)
    throw ValidationError("toy scene needs at least one train and test view");
  ToyScene toy{{}, {}, build_toy_field(o.grid)};
  const RenderOptions render{o.samples_per_ray, Eigen::Vector3d::Zero(), 0.0};

  auto make_view = [&](double azimuth, double elevation) {
    const Eigen::Vector3d eye = o.camera_distance * Eigen::Vector3d(std::cos(elevation) * std::cos(azimuth),
                                                                   std::cos(elevation) * std::sin(azimuth),
                                                                   std::sin(elevation));
    CameraView view;
    view.cam_to_world = look_at(eye, Eigen::Vector3d::Zero());
    view.intrinsics = intrinsics_from_fov(o.camera_angle_x, o.width, o.height);
    view.width = o.width;
    view.height = o.height;
    view.near = o.near;
    view.far = o.far;
    return view;
  };

  const double deg = std::numbers::pi / 180.0;
  for (SceneSet* set : {&toy.train, &toy.test}) {
    set->camera_angle_x = o.camera_angle_x;
    set->bbox = Aabb{};
  }
  for (int i = 0; i < o.train_views; ++i) {
    const double az = 2.0 * std::numbers::pi * i / o.train_views;
    const double el = (i % 2 == 0 ? 20.0 : 40.0) * deg;
    toy.train.views.push_back(make_view(az, el));
  }
  for (int i = 0; i < o.test_views; ++i) {
    const double az = 2.0 * std::numbers::pi * (i + 0.5) / o.test_views + std::numbers::pi / o.train_views;
    toy.test.views.push_back(make_view(az, 30.0 * deg));
  }
  for (SceneSet* set : {&toy.train, &toy.test})
    for (const CameraView& v : set->views)
      set->images.push_back(render_view_antialiased(toy.field, v, o.supersample, render));
  return toy;
}

void write_toy_scene(const ToyScene& toy, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_scene(toy.train, dir / "transforms_train.json", "train");
  save_scene(toy.test, dir / "transforms_test.json", "test");
  save_field(toy.field, dir / "gt_field.bin");
}

}  // namespace clearfield
