#include "clearfield/workflows.hpp"

#include "clearfield/degradation.hpp"
#include "clearfield/errors.hpp"
#include "clearfield/restore.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace clearfield {

using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Manifest `transforms_train.json` pairs with `transforms_test.json`.
fs::path default_holdout(const fs::path& scene) {
  std::string name = scene.filename().string();
  const auto pos = name.find("train");
  if (pos != std::string::npos) name.replace(pos, 5, "test");
  else name = "transforms_test.json";
  return scene.parent_path() / name;
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(name, e.what(), StageError::Cause::validation);
  } catch (const IoError& e) {
    throw StageError(name, e.what(), StageError::Cause::io);
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct PreparedScene {
  fs::path train_manifest;
  fs::path test_manifest;
  json artifacts = json::object();
};

PreparedScene prepare(const RunConfig& cfg) {
  const fs::path out = cfg.out;
  PreparedScene p;
  stage("scene", [&] {
    if (cfg.scene.empty()) throw ValidationError("no scene given");
    if (cfg.scene == "toy") {
      cmd_gen_toy(out / "toy");
      p.train_manifest = out / "toy" / "transforms_train.json";
      p.test_manifest = out / "toy" / "transforms_test.json";
    } else {
      p.train_manifest = cfg.scene;
      p.test_manifest = cfg.test_scene.empty() ? default_holdout(cfg.scene) : fs::path(cfg.test_scene);
    }
    if (!fs::exists(p.train_manifest)) throw IoError("missing manifest " + p.train_manifest.string());
    if (!fs::exists(p.test_manifest)) throw IoError("missing holdout manifest " + p.test_manifest.string());
    p.artifacts["train_scene"] = p.train_manifest.string();
    p.artifacts["test_scene"] = p.test_manifest.string();
    return 0;
  });

  fs::path current = p.train_manifest;
  if (cfg.degrade) {
    current = stage("degrade", [&] { return cmd_degrade(current, cfg.seed, out / "degraded", cfg.degrade_target); });
    fs::copy_file(out / "degraded" / "theta.json", out / "theta.json", fs::copy_options::overwrite_existing);
    p.artifacts["degraded_scene"] = current.string();
    p.artifacts["theta"] = (out / "theta.json").string();
  }
  current = stage("restore", [&] { return cmd_restore(current, cfg.strategy, cfg.k, out / "restored"); });
  p.artifacts["restored_scene"] = current.string();
  p.train_manifest = current;
  return p;
}

}  // namespace

void cmd_gen_toy(const fs::path& out, const ToySceneOptions& options) {
  write_toy_scene(generate_toy_scene(options), out);
}

fs::path cmd_degrade(const fs::path& scene, std::uint64_t seed, const fs::path& out,
                     std::optional<std::pair<int, int>> target) {
  const SceneSet input = load_scene(scene);
  const DegradedScene degraded = degrade_scene(input, seed, target);
  const fs::path manifest = out / "transforms.json";
  fs::create_directories(out);
  save_scene(degraded.scene, manifest, "images");
  json theta = params_to_json(degraded.theta);
  write_json(out / "theta.json", {{"seed", seed}, {"source", scene.string()}, {"theta", theta}});
  return manifest;
}

void cmd_make_triplets(const fs::path& clip, std::uint64_t seed, int count, const fs::path& out) {
  synth_restoration_triplets(load_scene(clip), seed, count, out);
}

fs::path cmd_restore(const fs::path& scene, const std::string& strategy, int k, const fs::path& out) {
  const SceneSet restored = restore_scene(load_scene(scene), strategy, k);
  const fs::path manifest = out / "transforms.json";
  fs::create_directories(out);
  save_scene(restored, manifest, "images");
  return manifest;
}

json trees_to_json(const std::vector<Quadtree>& trees) {
  json arr = json::array();
  for (const Quadtree& t : trees) arr.push_back(t.to_json());
  return {{"trees", arr}};
}

std::vector<Quadtree> trees_from_json(const json& j) {
  if (!j.contains("trees") || !j["trees"].is_array()) throw ValidationError("tree state needs a 'trees' array");
  std::vector<Quadtree> trees;
  for (const json& t : j["trees"]) trees.push_back(Quadtree::from_json(t));
  return trees;
}

TrainResult cmd_train(const fs::path& scene, const fs::path& field_out, const RunConfig& cfg) {
  cfg.validate();
  const SceneSet set = load_scene(scene);
  TrainResult result = train(set, cfg.train, cfg.guidance_or_null(), cfg.quadtree_or_null());

  const fs::path dir = field_out.has_parent_path() ? field_out.parent_path() : fs::path(".");
  fs::create_directories(dir);
  save_field(result.field, field_out);

  std::ofstream log(dir / "train_log.jsonl");
  if (!log) throw IoError("cannot write train log");
  for (const EpochLog& e : result.log.epochs) {
    log << json{{"epoch", e.epoch},
                {"stage", e.fine ? "fine" : "coarse"},
                {"supersampled", e.supersampled},
                {"loss", e.loss},
                {"pixels", e.pixels},
                {"rays_used", e.rays_used},
                {"iterations", e.iterations},
                {"seconds", e.seconds}}
               .dump()
        << '\n';
  }
  if (!result.trees.empty()) write_json(dir / "tree_state.json", trees_to_json(result.trees));
  return result;
}

void cmd_render(const fs::path& field_path, const std::optional<fs::path>& scene, const std::string& pose,
                const fs::path& out, const RenderOptions& opts) {
  const VoxelField field = load_field(field_path);
  CameraView view;
  const bool is_index = !pose.empty() && pose.find_first_not_of("0123456789") == std::string::npos;
  if (is_index) {
    if (!scene) throw ValidationError("a pose index needs --scene");
    const SceneSet set = load_scene(*scene);
    const std::size_t i = std::stoul(pose);
    if (i >= set.size()) throw ValidationError("pose index " + pose + " out of range");
    view = set.views[i];
  } else {
    const json j = read_json(pose);
    try {
      const double angle = j.at("camera_angle_x").get<double>();
      view.width = j.at("width").get<int>();
      view.height = j.at("height").get<int>();
      view.intrinsics = intrinsics_from_fov(angle, view.width, view.height);
      const json& m = j.at("transform_matrix");
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) view.cam_to_world(r, c) = m.at(r).at(c).get<double>();
      view.near = j.value("near", view.near);
      view.far = j.value("far", view.far);
    } catch (const json::exception& e) {
      throw ValidationError("pose file: " + std::string(e.what()));
    }
  }
  validate_view(view);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_image(render_view(field, view, opts), out);
}

EvalReport cmd_eval(const fs::path& field, const fs::path& scene, const fs::path& out, const RenderOptions& opts,
                    std::optional<std::int64_t> rays_used, std::optional<double> train_seconds) {
  EvalReport report = evaluate(load_field(field), load_scene(scene), opts);
  if (rays_used) report.rays_used = *rays_used;
  report.train_seconds = train_seconds;
  write_json(out, report.to_json());
  return report;
}

void cmd_viz_quadtree(const fs::path& scene, const fs::path& tree_state, const fs::path& out) {
  const SceneSet set = load_scene(scene);
  const std::vector<Quadtree> trees = trees_from_json(read_json(tree_state));
  if (trees.size() != set.size())
    throw ValidationError("tree state has " + std::to_string(trees.size()) + " trees for " +
                          std::to_string(set.size()) + " views");
  fs::create_directories(out);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu.png", i);
    save_image(render_tree_overlay(trees[i], set.images[i]), out / name);
  }
}

int cmd_pipeline(const RunConfig& cfg) {
  stage("config", [&] {
    cfg.validate();
    return 0;
  });
  const fs::path out = cfg.out;
  fs::create_directories(out);
  write_json(out / "config.json", run_config_to_json(cfg));

  PreparedScene prep = prepare(cfg);
  json artifacts = prep.artifacts;
  artifacts["config"] = (out / "config.json").string();

  const TrainResult result =
      stage("train", [&] { return cmd_train(prep.train_manifest, out / "field.bin", cfg); });
  artifacts["field"] = (out / "field.bin").string();
  artifacts["train_log"] = (out / "train_log.jsonl").string();
  if (!result.trees.empty()) artifacts["tree_state"] = (out / "tree_state.json").string();

  const std::optional<double> seconds =
      cfg.deterministic ? std::nullopt : std::optional<double>(result.log.total_seconds());
  const EvalReport report = stage("eval", [&] {
    return cmd_eval(out / "field.bin", prep.test_manifest, out / "report.json", cfg.eval_options(),
                    result.log.total_rays(), seconds);
  });
  artifacts["report"] = (out / "report.json").string();

  for (const auto& [key, value] : artifacts.items())
    if (!fs::exists(value.get<std::string>())) throw StageError("summary", "missing artifact " + key);
  write_json(out / "summary.json", {{"artifacts", artifacts},
                                    {"mean_psnr", report.mean_psnr},
                                    {"mean_ssim", report.mean_ssim},
                                    {"rays_used", report.rays_used},
                                    {"fine_rays", result.log.fine_rays()}});
  return 0;
}

json AblationTable::to_json() const {
  json arr = json::array();
  for (const AblationRow& r : rows)
    arr.push_back({{"name", r.name},
                   {"guidance", r.guidance},
                   {"quadtree", r.quadtree},
                   {"psnr", r.psnr},
                   {"ssim", r.ssim},
                   {"rays", r.rays},
                   {"fine_rays", r.fine_rays},
                   {"seconds", r.seconds}});
  return {{"columns", {"name", "guidance", "quadtree", "psnr", "ssim", "rays", "fine_rays", "seconds"}},
          {"rows", arr}};
}

AblationTable AblationTable::from_json(const json& j) {
  AblationTable t;
  try {
    for (const json& r : j.at("rows")) {
      t.rows.push_back({r.at("name").get<std::string>(), r.at("guidance").get<bool>(), r.at("quadtree").get<bool>(),
                        r.at("psnr").get<double>(), r.at("ssim").get<double>(), r.at("rays").get<std::int64_t>(),
                        r.at("fine_rays").get<std::int64_t>(), r.at("seconds").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("ablation table: ") + e.what());
  }
  return t;
}

std::string AblationTable::to_markdown() const {
  std::ostringstream s;
  s << "| run | PSNR | SSIM | RAYS | FINE RAYS | TIME |\n|---|---|---|---|---|---|\n";
  s << std::fixed;
  for (const AblationRow& r : rows)
    s << "| " << r.name << " | " << std::setprecision(2) << r.psnr << " | " << std::setprecision(3) << r.ssim
      << " | " << r.rays << " | " << r.fine_rays << " | " << std::setprecision(1) << r.seconds << "s |\n";
  return s.str();
}

AblationTable cmd_ablate(const RunConfig& base) {
  const fs::path out = base.out;
  fs::create_directories(out);
  const PreparedScene prep = prepare(base);
  const SceneSet train_set = load_scene(prep.train_manifest);
  const SceneSet test_set = load_scene(prep.test_manifest);

  AblationTable table;
  for (const bool guidance : {false, true}) {
    for (const bool quadtree : {false, true}) {
      std::optional<GuidanceConfig> g;
      if (guidance) {
        g = base.guidance;
      } else if (quadtree) {
        g = GuidanceConfig{1, base.guidance.covariance, base.guidance.loss, base.guidance.start_epoch};
      }
      std::optional<QuadtreeSettings> q;
      if (quadtree) q = base.quadtree;
      const std::string name = std::string(guidance ? "guidance" : "no-guidance") + "/" +
                               (quadtree ? "quadtree" : "no-quadtree");
      const TrainResult result = stage("train", [&] { return train(train_set, base.train, g, q); });
      const EvalReport report = stage("eval", [&] { return evaluate(result.field, test_set, base.eval_options()); });
      table.rows.push_back({name, guidance, quadtree, report.mean_psnr, report.mean_ssim, result.log.total_rays(),
                            result.log.fine_rays(), result.log.total_seconds()});
    }
  }
  write_json(out / "ablation.json", table.to_json());
  std::ofstream md(out / "ablation.md");
  md << table.to_markdown();
  if (!md) throw IoError("cannot write ablation.md");
  return table;
}

}  // namespace clearfield
