#pragma once

#include "clearfield/metrics.hpp"
#include "clearfield/run_config.hpp"
#include "clearfield/toy_scene.hpp"
#include "clearfield/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace clearfield {

namespace fs = std::filesystem;

/// Writes the procedural scene under `out`.
void cmd_gen_toy(const fs::path& out, const ToySceneOptions& options = {});

/// Degraded images under out/images, `transforms.json`, `theta.json`.
/// Returns the degraded manifest path.
fs::path cmd_degrade(const fs::path& scene, std::uint64_t seed, const fs::path& out,
                     std::optional<std::pair<int, int>> target = std::nullopt);

void cmd_make_triplets(const fs::path& clip, std::uint64_t seed, int count, const fs::path& out);

/// Restored images under out/images and `transforms.json`; returns the manifest path.
fs::path cmd_restore(const fs::path& scene, const std::string& strategy, int k, const fs::path& out);

/// Trains on `scene` and writes the field, `train_log.jsonl` and (with
/// quadtree planning) `tree_state.json` next to it.
TrainResult cmd_train(const fs::path& scene, const fs::path& field_out, const RunConfig& cfg);

/// `pose` is a view index into `scene` or a JSON pose file with
/// camera_angle_x, width, height and transform_matrix (near/far optional).
void cmd_render(const fs::path& field, const std::optional<fs::path>& scene, const std::string& pose,
                const fs::path& out, const RenderOptions& options = {});

EvalReport cmd_eval(const fs::path& field, const fs::path& scene, const fs::path& out,
                    const RenderOptions& options = {},
                    std::optional<std::int64_t> rays_used = std::nullopt,
                    std::optional<double> train_seconds = std::nullopt);

/// One overlay PNG per view (view_000.png, ...).
void cmd_viz_quadtree(const fs::path& scene, const fs::path& tree_state, const fs::path& out);

nlohmann::json trees_to_json(const std::vector<Quadtree>& trees);
std::vector<Quadtree> trees_from_json(const nlohmann::json& j);

/// degrade -> restore -> train -> eval under cfg.out plus `summary.json`.
/// Returns 0 on success; a failing stage is named on stderr and its error
/// rethrown as StageError.
int cmd_pipeline(const RunConfig& cfg);

struct StageError : std::runtime_error {
  enum class Cause { other, validation, io };
  StageError(std::string stage, const std::string& what, Cause cause = Cause::other)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage(std::move(stage)), cause(cause) {}
  std::string stage;
  Cause cause;
};

struct AblationRow {
  std::string name;
  bool guidance = false;
  bool quadtree = false;
  double psnr = 0.0;
  double ssim = 0.0;
  std::int64_t rays = 0;
  std::int64_t fine_rays = 0;
  double seconds = 0.0;

  friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  nlohmann::json to_json() const;
  static AblationTable from_json(const nlohmann::json& j);
  std::string to_markdown() const;
  friend bool operator==(const AblationTable&, const AblationTable&) = default;
};

/// {guidance off/on} x {quadtree off/on} on one prepared scene. The
/// quadtree-without-guidance row plans single center rays per pixel.
AblationTable cmd_ablate(const RunConfig& cfg);

}  // namespace clearfield
