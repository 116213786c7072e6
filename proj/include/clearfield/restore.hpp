#pragma once

#include "clearfield/image.hpp"
#include "clearfield/scene.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clearfield {

struct ViewSelection {
  int target_index = 0;
  std::vector<int> reference_indices;
  std::vector<double> scores;  // non-increasing
};

/// Weight of the normalized camera-center distance in the view score.
inline constexpr double kViewDistanceWeight = 0.5;

/// cos(angle between optical axes) - 0.5 * |center_a - center_b| / diameter,
/// where diameter is the largest distance between any two camera centers
/// (the distance term vanishes when all centers coincide).
double view_score(const CameraView& a, const CameraView& b, double diameter);

double camera_diameter(std::span<const CameraView> views);

/// Top-k references for `target` by view_score; ties go to the lower index.
/// Uses poses only.
ViewSelection select_views(std::span<const CameraView> views, int target, int k);
inline ViewSelection select_views(const SceneSet& scene, int target, int k) {
  return select_views(scene.views, target, k);
}

/// Restores one target image given its selected reference images.
using Restorer =
    std::function<ImageBuffer(const ImageBuffer& target, std::span<const ImageBuffer> references)>;

/// Strategy names: "identity" or "exec:<program>". The external program is
/// called as `<program> <out.png> <target.png> [<ref.png> ...]` and must
/// write a PNG of the target's size to <out.png>.
Restorer make_restorer(std::string_view strategy);

SceneSet restore_scene(const SceneSet& scene, const Restorer& restorer, int k);
SceneSet restore_scene(const SceneSet& scene, std::string_view strategy, int k);

}  // namespace clearfield
