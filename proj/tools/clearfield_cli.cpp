#include "clearfield/degradation.hpp"
#include "clearfield/errors.hpp"
#include "clearfield/workflows.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace clearfield;
using nlohmann::json;

namespace {

// Flags that feed the run configuration; unset flags leave the file/defaults alone.
struct ConfigFlags {
  std::string config;
  std::optional<std::string> scene, test_scene, strategy, guidance, quadtree, guidance_loss, bg;
  std::optional<std::uint64_t> seed;
  std::optional<int> k, s, coarse_epochs, fine_epochs, resolution, batch_rays, samples_per_ray;
  std::optional<double> mu;
  bool deterministic = false;
  std::string out = "out";

  void add_to(CLI::App* cmd, bool with_scene_flags) {
    cmd->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "degradation and training seed");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--guidance", guidance, "on|off")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--quadtree", quadtree, "on|off")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--s", s, "pseudo pixels per side");
    cmd->add_option("--loss", guidance_loss, "guided loss l1|l2")->check(CLI::IsMember({"l1", "l2"}));
    cmd->add_option("--mu", mu, "quadtree sampling density");
    cmd->add_option("--coarse-epochs", coarse_epochs);
    cmd->add_option("--fine-epochs", fine_epochs);
    cmd->add_option("--resolution", resolution, "voxel grid side");
    cmd->add_option("--batch-rays", batch_rays);
    cmd->add_option("--samples-per-ray", samples_per_ray);
    cmd->add_option("--bg", bg, "background color black|white")->check(CLI::IsMember({"black", "white"}));
    cmd->add_flag("--deterministic", deterministic, "serial, reproducible run with no timing in reports");
    if (with_scene_flags) {
      cmd->add_option("--scene", scene, "training manifest, or 'toy'");
      cmd->add_option("--test-scene", test_scene, "holdout manifest");
      cmd->add_option("--strategy", strategy, "restoration strategy: identity | exec:<program>");
      cmd->add_option("--k", k, "reference views per restoration");
    }
  }

  RunConfig resolve(bool out_is_dir = true) const {
    json o = json::object();
    if (scene) o["scene"] = *scene;
    if (test_scene) o["test_scene"] = *test_scene;
    if (seed) o["seed"] = *seed;
    if (out_is_dir) o["out"] = out;
    if (deterministic) o["deterministic"] = true;
    if (strategy) o["restoration"]["strategy"] = *strategy;
    if (k) o["restoration"]["k"] = *k;
    if (guidance) o["guidance"]["enabled"] = *guidance == "on";
    if (s) o["guidance"]["s"] = *s;
    if (guidance_loss) o["guidance"]["loss"] = *guidance_loss;
    if (quadtree) o["quadtree"]["enabled"] = *quadtree == "on";
    if (mu) o["quadtree"]["mu"] = *mu;
    if (coarse_epochs) o["train"]["coarse_epochs"] = *coarse_epochs;
    if (fine_epochs) o["train"]["fine_epochs"] = *fine_epochs;
    if (resolution) o["train"]["resolution"] = *resolution;
    if (batch_rays) o["train"]["batch_rays"] = *batch_rays;
    if (samples_per_ray) o["train"]["samples_per_ray"] = *samples_per_ray;
    if (bg) o["train"]["background"] = *bg == "white" ? json::array({1.0, 1.0, 1.0}) : json::array({0.0, 0.0, 0.0});
    std::optional<fs::path> file;
    if (!config.empty()) file = config;
    return merge_run_config(file, o);
  }
};

RenderOptions render_options(int spp, const std::string& bg) {
  RenderOptions o;
  o.samples_per_ray = spp;
  o.background = Eigen::Vector3d::Constant(bg == "white" ? 1.0 : 0.0);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clearfield: degraded-view radiance field reconstruction"};
  app.require_subcommand(1);

  // gen-toy
  auto* gen = app.add_subcommand("gen-toy", "write the procedural toy scene");
  ToySceneOptions toy;
  std::string gen_out = "toy";
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "unused; the toy scene is fixed");
  gen->add_option("--width", toy.width);
  gen->add_option("--height", toy.height);
  gen->add_option("--train-views", toy.train_views);
  gen->add_option("--test-views", toy.test_views);
  gen->add_option("--grid", toy.grid);
  gen->add_option("--supersample", toy.supersample);

  // degrade
  auto* deg = app.add_subcommand("degrade", "apply one sampled degradation to every view");
  std::string deg_scene, deg_out = "degraded";
  std::uint64_t deg_seed = 0;
  std::optional<int> tw, th;
  deg->add_option("--scene", deg_scene)->required()->check(CLI::ExistingFile);
  deg->add_option("--seed", deg_seed);
  deg->add_option("--out", deg_out);
  deg->add_option("--target-w", tw);
  deg->add_option("--target-h", th);

  // make-triplets
  auto* trip = app.add_subcommand("make-triplets", "synthesize restoration training triplets");
  std::string trip_clip, trip_out = "triplets";
  std::uint64_t trip_seed = 0;
  int trip_count = 100;
  trip->add_option("--clip", trip_clip)->required()->check(CLI::ExistingFile);
  trip->add_option("--seed", trip_seed);
  trip->add_option("--count", trip_count);
  trip->add_option("--out", trip_out);

  // restore
  auto* rest = app.add_subcommand("restore", "restore every view from its k nearest references");
  std::string rest_scene, rest_strategy = "identity", rest_out = "restored";
  int rest_k = 3;
  std::uint64_t rest_seed = 0;
  rest->add_option("--scene", rest_scene)->required()->check(CLI::ExistingFile);
  rest->add_option("--strategy", rest_strategy);
  rest->add_option("--k", rest_k);
  rest->add_option("--out", rest_out);
  rest->add_option("--seed", rest_seed, "unused; restoration is deterministic");

  // train
  auto* tr = app.add_subcommand("train", "train a voxel radiance field");
  ConfigFlags tr_flags;
  std::string tr_scene;
  tr_flags.add_to(tr, false);
  tr_flags.out = "field.bin";
  tr->get_option("--out")->description("output field file");
  tr->add_option("--scene", tr_scene)->required()->check(CLI::ExistingFile);

  // render
  auto* ren = app.add_subcommand("render", "render a view of a trained field");
  std::string ren_field, ren_pose, ren_out = "render.png";
  std::optional<std::string> ren_scene;
  int ren_spp = 128;
  std::string ren_bg = "black";
  std::uint64_t ren_seed = 0;
  ren->add_option("--field", ren_field)->required()->check(CLI::ExistingFile);
  ren->add_option("--pose", ren_pose, "view index into --scene, or a pose JSON file")->required();
  ren->add_option("--scene", ren_scene);
  ren->add_option("--out", ren_out);
  ren->add_option("--samples-per-ray", ren_spp);
  ren->add_option("--bg", ren_bg)->check(CLI::IsMember({"black", "white"}));
  ren->add_option("--seed", ren_seed, "unused; rendering is deterministic");

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of a field on held-out views");
  std::string ev_field, ev_scene, ev_out = "report.json";
  int ev_spp = 128;
  std::string ev_bg = "black";
  std::uint64_t ev_seed = 0;
  ev->add_option("--field", ev_field)->required()->check(CLI::ExistingFile);
  ev->add_option("--scene", ev_scene)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out);
  ev->add_option("--samples-per-ray", ev_spp);
  ev->add_option("--bg", ev_bg)->check(CLI::IsMember({"black", "white"}));
  ev->add_option("--seed", ev_seed, "unused; evaluation is deterministic");

  // viz-quadtree
  auto* viz = app.add_subcommand("viz-quadtree", "draw quadtree leaves over the training views");
  std::string viz_scene, viz_state, viz_out = "quadtree";
  std::uint64_t viz_seed = 0;
  viz->add_option("--scene", viz_scene)->required()->check(CLI::ExistingFile);
  viz->add_option("--tree-state", viz_state)->required()->check(CLI::ExistingFile);
  viz->add_option("--out", viz_out);
  viz->add_option("--seed", viz_seed, "unused");

  auto* pipe = app.add_subcommand("pipeline", "degrade, restore, train and evaluate");
  ConfigFlags pipe_flags;
  pipe_flags.add_to(pipe, true);

  auto* abl = app.add_subcommand("ablate", "guidance x quadtree ablation grid");
  ConfigFlags abl_flags;
  abl_flags.add_to(abl, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cmd_gen_toy(gen_out, toy);
    } else if (deg->parsed()) {
      if (tw.has_value() != th.has_value()) throw ValidationError("--target-w and --target-h go together");
      std::optional<std::pair<int, int>> target;
      if (tw) target = std::make_pair(*tw, *th);
      cmd_degrade(deg_scene, deg_seed, deg_out, target);
    } else if (trip->parsed()) {
      cmd_make_triplets(trip_clip, trip_seed, trip_count, trip_out);
    } else if (rest->parsed()) {
      cmd_restore(rest_scene, rest_strategy, rest_k, rest_out);
    } else if (tr->parsed()) {
      RunConfig cfg = tr_flags.resolve(false);
      cmd_train(tr_scene, tr_flags.out, cfg);
    } else if (ren->parsed()) {
      std::optional<fs::path> scene;
      if (ren_scene) scene = *ren_scene;
      cmd_render(ren_field, scene, ren_pose, ren_out, render_options(ren_spp, ren_bg));
    } else if (ev->parsed()) {
      const EvalReport r = cmd_eval(ev_field, ev_scene, ev_out, render_options(ev_spp, ev_bg));
      std::cout << "mean PSNR " << r.mean_psnr << " dB, mean SSIM " << r.mean_ssim << '\n';
    } else if (viz->parsed()) {
      cmd_viz_quadtree(viz_scene, viz_state, viz_out);
    } else if (pipe->parsed()) {
      cmd_pipeline(pipe_flags.resolve());
    } else if (abl->parsed()) {
      std::cout << cmd_ablate(abl_flags.resolve()).to_markdown();
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.cause == StageError::Cause::validation ? 2 : e.cause == StageError::Cause::io ? 3 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
