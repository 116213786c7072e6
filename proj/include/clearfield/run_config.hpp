#pragma once

#include "clearfield/quadtree.hpp"
#include "clearfield/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

namespace clearfield {

/// Everything a pipeline run needs. Every field has a default; a config file
/// is merged over the defaults and command-line flags over the file.
struct RunConfig {
  std::string scene;       // training manifest, or "toy" to generate one
  std::string test_scene;  // holdout manifest; empty -> transforms_test.json next to `scene`
  std::uint64_t seed = 0;
  std::string out = "out";
  bool deterministic = false;

  bool degrade = true;
  std::optional<std::pair<int, int>> degrade_target;

  std::string strategy = "identity";
  int k = 3;

  TrainConfig train;
  bool guidance_enabled = true;
  GuidanceConfig guidance;
  bool quadtree_enabled = true;
  QuadtreeSettings quadtree;

  int eval_samples_per_ray = 128;

  /// Center-ray rendering for evaluation, on the training background.
  RenderOptions eval_options() const { return {eval_samples_per_ray, train.background, 0.0}; }
  std::optional<GuidanceConfig> guidance_or_null() const;
  std::optional<QuadtreeSettings> quadtree_or_null() const;

  /// Throws ValidationError for inconsistent settings, e.g. quadtree planning
  /// without guidance.
  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Reads a (possibly partial) tree over the defaults. Keys starting with '_'
/// are comments; any other unknown key is a ValidationError.
RunConfig run_config_from_json(const nlohmann::json& j);

/// defaults < file < overrides, merged as JSON merge patches.
RunConfig merge_run_config(const std::optional<std::filesystem::path>& file,
                           const nlohmann::json& overrides);

}  // namespace clearfield
