#include "clearfield/scene.hpp"

#include "clearfield/errors.hpp"

#include <Eigen/LU>
#include <json.hpp>

#include <cmath>
#include <fstream>

namespace clearfield {

using nlohmann::json;

namespace {

constexpr double kDefaultNear = 0.1;
constexpr double kDefaultFar = 6.0;

Eigen::Matrix4d matrix_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("transform_matrix must be 4x4");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw ValidationError("transform_matrix must be 4x4");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json matrix_to_json(const Eigen::Matrix4d& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::filesystem::path resolve_image(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p = base / rel;
  if (std::filesystem::exists(p)) return p;
  std::filesystem::path with_ext = p;
  with_ext += ".png";
  if (std::filesystem::exists(with_ext)) return with_ext;
  throw IoError("image '" + p.string() + "' not found");
}

}  // namespace

void validate_view(const CameraView& view) {
  const Eigen::Matrix3d rot = view.cam_to_world.block<3, 3>(0, 0);
  if (!view.cam_to_world.allFinite() || std::abs(rot.determinant()) < 1e-12)
    throw ValidationError("camera transform is not invertible");
  if (((rot.transpose() * rot) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-5)
    throw ValidationError("camera rotation is not orthonormal");
  if (!(view.near > 0.0 && view.near < view.far))
    throw ValidationError("camera requires 0 < near < far");
}

void SceneSet::validate() const {
  if (views.empty()) throw ValidationError("scene has no views");
  if (views.size() != images.size()) throw ValidationError("scene views and images differ in count");
  for (std::size_t i = 0; i < views.size(); ++i) {
    validate_view(views[i]);
    if (!images[i].same_shape(images.front()))
      throw ValidationError("scene images must share one resolution");
  }
}

Intrinsics intrinsics_from_fov(double camera_angle_x, int width, int height) {
  const double focal = 0.5 * width / std::tan(0.5 * camera_angle_x);
  return {focal, focal, 0.5 * width, 0.5 * height};
}

SceneSet load_scene(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open scene manifest '" + manifest_path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  if (!doc.contains("camera_angle_x") || !doc.contains("frames"))
    throw ValidationError("manifest needs camera_angle_x and frames");

  SceneSet scene;
  scene.camera_angle_x = doc.at("camera_angle_x").get<double>();
  if (doc.contains("aabb")) {
    const auto& box = doc.at("aabb");
    for (int a = 0; a < 3; ++a) {
      scene.bbox.min[a] = box.at(0).at(a).get<double>();
      scene.bbox.max[a] = box.at(1).at(a).get<double>();
    }
    if (!(scene.bbox.min.array() < scene.bbox.max.array()).all())
      throw ValidationError("aabb min must be below max");
  }

  const auto base = manifest_path.parent_path();
  for (const auto& frame : doc.at("frames")) {
    CameraView view;
    view.image_path = frame.at("file_path").get<std::string>();
    view.cam_to_world = matrix_from_json(frame.at("transform_matrix"));
    view.near = frame.value("near", kDefaultNear);
    view.far = frame.value("far", kDefaultFar);
    ImageBuffer img = load_image(resolve_image(base, view.image_path));
    view.width = img.width();
    view.height = img.height();
    view.intrinsics = intrinsics_from_fov(scene.camera_angle_x, img.width(), img.height());
    validate_view(view);
    scene.views.push_back(std::move(view));
    scene.images.push_back(std::move(img));
  }
  scene.validate();
  return scene;
}

void write_manifest(const SceneSet& scene, const std::filesystem::path& manifest_path,
                    const std::vector<std::string>& image_paths) {
  json doc;
  doc["camera_angle_x"] = scene.camera_angle_x;
  doc["aabb"] = {{scene.bbox.min.x(), scene.bbox.min.y(), scene.bbox.min.z()},
                 {scene.bbox.max.x(), scene.bbox.max.y(), scene.bbox.max.z()}};
  json frames = json::array();
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const CameraView& v = scene.views[i];
    frames.push_back({{"file_path", image_paths.at(i)},
                      {"transform_matrix", matrix_to_json(v.cam_to_world)},
                      {"near", v.near},
                      {"far", v.far}});
  }
  doc["frames"] = frames;
  if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write manifest '" + manifest_path.string() + "'");
  out << doc.dump(2) << "\n";
}

void save_scene(const SceneSet& scene, const std::filesystem::path& manifest_path,
                const std::string& image_dir) {
  scene.validate();
  const auto base = manifest_path.parent_path();
  std::filesystem::create_directories(base / image_dir);
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "r_%03zu.png", i);
    const std::string rel = image_dir + "/" + name;
    save_image(scene.images[i], base / rel);
    paths.push_back(rel);
  }
  write_manifest(scene, manifest_path, paths);
}

Ray camera_ray(const CameraView& view, double u, double v) {
  const Intrinsics& k = view.intrinsics;
  const Eigen::Vector3d local((u - k.cx) / k.fx, -(v - k.cy) / k.fy, -1.0);
  Ray ray;
  ray.direction = (view.cam_to_world.block<3, 3>(0, 0) * local).normalized();
  ray.origin = view.center();
  ray.near = view.near;
  ray.far = view.far;
  return ray;
}

}  // namespace clearfield
