#include "clearfield/restore.hpp"

#include "clearfield/errors.hpp"
#include "clearfield/rng.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>

namespace clearfield {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

ImageBuffer run_external(const std::string& program, const ImageBuffer& target,
                         std::span<const ImageBuffer> refs) {
  namespace fs = std::filesystem;
  static std::uint64_t counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("clearfield-restore-" + std::to_string(mix64(++counter ^ reinterpret_cast<std::uintptr_t>(&target))));
  fs::create_directories(dir);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{dir};

  std::string cmd = shell_quote(program) + " " + shell_quote((dir / "out.png").string());
  save_image(target, dir / "target.png", 16);
  cmd += " " + shell_quote((dir / "target.png").string());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const fs::path p = dir / ("ref_" + std::to_string(i) + ".png");
    save_image(refs[i], p, 16);
    cmd += " " + shell_quote(p.string());
  }
  if (std::system(cmd.c_str()) != 0) throw IoError("restoration command failed: " + program);
  ImageBuffer out = load_image(dir / "out.png");
  if (!out.same_shape(target)) throw ValidationError("restoration command changed the image size");
  return out;
}

}  // namespace

double camera_diameter(std::span<const CameraView> views) {
  double d = 0.0;
  for (std::size_t a = 0; a < views.size(); ++a)
    for (std::size_t b = a + 1; b < views.size(); ++b)
      d = std::max(d, (views[a].center() - views[b].center()).norm());
  return d;
}

double view_score(const CameraView& a, const CameraView& b, double diameter) {
  const double cosine = a.forward().normalized().dot(b.forward().normalized());
  const double dist = diameter > 0.0 ? (a.center() - b.center()).norm() / diameter : 0.0;
  return cosine - kViewDistanceWeight * dist;
}

ViewSelection select_views(std::span<const CameraView> views, int target, int k) {
  const int n = static_cast<int>(views.size());
  if (target < 0 || target >= n) throw ValidationError("target view index out of range");
  if (k < 0 || k >= n) throw ValidationError("k must satisfy 0 <= k < number of views");

  const double diameter = camera_diameter(views);
  std::vector<int> candidates;
  std::vector<double> score(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (i == target) continue;
    candidates.push_back(i);
    score[i] = view_score(views[target], views[i], diameter);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return score[a] > score[b]; });

  ViewSelection sel;
  sel.target_index = target;
  for (int i = 0; i < k; ++i) {
    sel.reference_indices.push_back(candidates[i]);
    sel.scores.push_back(score[candidates[i]]);
  }
  return sel;
}

Restorer make_restorer(std::string_view strategy) {
  if (strategy == "identity")
    return [](const ImageBuffer& target, std::span<const ImageBuffer>) { return target; };
  if (strategy.starts_with("exec:") && strategy.size() > 5) {
    std::string program(strategy.substr(5));
    return [program](const ImageBuffer& target, std::span<const ImageBuffer> refs) {
      return run_external(program, target, refs);
    };
  }
  throw ValidationError("unknown restoration strategy '" + std::string(strategy) + "'");
}

SceneSet restore_scene(const SceneSet& scene, const Restorer& restorer, int k) {
  scene.validate();
  SceneSet out = scene;
  for (int i = 0; i < static_cast<int>(scene.size()); ++i) {
    const ViewSelection sel = select_views(scene, i, k);
    std::vector<ImageBuffer> refs;
    for (int r : sel.reference_indices) refs.push_back(scene.images[r]);
    out.images[i] = restorer(scene.images[i], refs);
    out.images[i].clamp();
  }
  return out;
}

SceneSet restore_scene(const SceneSet& scene, std::string_view strategy, int k) {
  return restore_scene(scene, make_restorer(strategy), k);
}

}  // namespace clearfield
