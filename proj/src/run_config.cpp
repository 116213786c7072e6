#include "clearfield/run_config.hpp"

#include "clearfield/errors.hpp"

#include <fstream>
#include <set>

namespace clearfield {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!key.empty() && key[0] == '_') continue;
    if (!allowed.contains(key)) throw ValidationError("unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::optional<GuidanceConfig> RunConfig::guidance_or_null() const {
  if (guidance_enabled) return guidance;
  return std::nullopt;
}

std::optional<QuadtreeSettings> RunConfig::quadtree_or_null() const {
  if (quadtree_enabled) return quadtree;
  return std::nullopt;
}

void RunConfig::validate() const {
  if (quadtree_enabled && !guidance_enabled)
    throw ValidationError("quadtree planning requires guidance (it plans the supersampled fine stage)");
  if (k < 1) throw ValidationError("restoration k must be >= 1");
  if (eval_samples_per_ray < 1) throw ValidationError("metrics.samples_per_ray must be >= 1");
  if (degrade_target && (degrade_target->first < 1 || degrade_target->second < 1))
    throw ValidationError("degradation target size must be positive");
  train.validate();
  if (guidance_enabled) {
    if (guidance.start_epoch < 0) throw ValidationError("guidance.start_epoch must be >= 0");
    make_pattern(guidance.s, guidance.covariance);
  }
  if (quadtree_enabled) {
    const auto& q = quadtree;
    if (!(q.mu > 0.0) || !(q.alpha >= 0.0) || q.min_area < 1 || !(q.uniform_fraction >= 0.0) ||
        !(q.uniform_fraction < 1.0))
      throw ValidationError("invalid quadtree settings");
  }
}

json run_config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const GuidanceConfig& g = c.guidance;
  const QuadtreeSettings& q = c.quadtree;
  json j;
  j["scene"] = c.scene;
  j["test_scene"] = c.test_scene;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["deterministic"] = c.deterministic;
  j["degradation"] = {{"enabled", c.degrade},
                      {"target_width", c.degrade_target ? json(c.degrade_target->first) : json(nullptr)},
                      {"target_height", c.degrade_target ? json(c.degrade_target->second) : json(nullptr)}};
  j["restoration"] = {{"strategy", c.strategy}, {"k", c.k}};
  j["train"] = {{"resolution", json::array({t.resolution.x(), t.resolution.y(), t.resolution.z()})},
                {"lr_density", t.lr_density},
                {"lr_color", t.lr_color},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_epsilon", t.adam_epsilon},
                {"lr_final_factor", t.lr_final_factor},
                {"batch_rays", t.batch_rays},
                {"coarse_epochs", t.coarse_epochs},
                {"fine_epochs", t.fine_epochs},
                {"samples_per_ray", t.samples_per_ray},
                {"stratified", t.stratified},
                {"init_density", t.init_density},
                {"init_color", t.init_color},
                {"background", vec_json(t.background)},
                {"min_transmittance", t.min_transmittance}};
  j["guidance"] = {{"enabled", c.guidance_enabled},
                   {"s", g.s},
                   {"cov", json::array({json::array({g.covariance(0, 0), g.covariance(0, 1)}),
                                        json::array({g.covariance(1, 0), g.covariance(1, 1)})})},
                   {"loss", std::string(to_string(g.loss))},
                   {"start_epoch", g.start_epoch},
                   {"_comment", "s x s pseudo pixels per real pixel, weighted by a Gaussian with covariance cov (pixel^2)"}};
  j["quadtree"] = {{"enabled", c.quadtree_enabled},
                   {"mu", q.mu},
                   {"alpha", q.alpha},
                   {"s_sample", q.s_sample},
                   {"s_divide", q.s_divide},
                   {"min_area", q.min_area},
                   {"uniform_fraction", q.uniform_fraction},
                   {"_comment", "leaves split above mean loss s_divide unless their area is <= min_area; alpha thins leaves whose last mean loss is below s_sample"}};
  j["metrics"] = {{"samples_per_ray", c.eval_samples_per_ray}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"scene", "test_scene", "seed", "out", "deterministic", "degradation", "restoration", "train",
                 "guidance", "quadtree", "metrics"},
             "config");
  RunConfig c;
  read(j, "scene", c.scene);
  read(j, "test_scene", c.test_scene);
  read(j, "seed", c.seed);
  read(j, "out", c.out);
  read(j, "deterministic", c.deterministic);

  if (j.contains("degradation")) {
    const json& d = j["degradation"];
    check_keys(d, {"enabled", "target_width", "target_height"}, "degradation");
    read(d, "enabled", c.degrade);
    std::optional<int> w, h;
    if (d.contains("target_width") && !d["target_width"].is_null()) w = d["target_width"].get<int>();
    if (d.contains("target_height") && !d["target_height"].is_null()) h = d["target_height"].get<int>();
    if (w.has_value() != h.has_value())
      throw ValidationError("degradation target needs both width and height");
    if (w) c.degrade_target = std::make_pair(*w, *h);
  }
  if (j.contains("restoration")) {
    const json& r = j["restoration"];
    check_keys(r, {"strategy", "k"}, "restoration");
    read(r, "strategy", c.strategy);
    read(r, "k", c.k);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, {"resolution", "lr_density", "lr_color", "adam_beta1", "adam_beta2", "adam_epsilon",
                   "lr_final_factor", "batch_rays", "coarse_epochs", "fine_epochs", "samples_per_ray",
                   "stratified", "init_density", "init_color", "background", "min_transmittance"},
               "train");
    TrainConfig& tc = c.train;
    if (t.contains("resolution")) {
      const json& r = t["resolution"];
      if (r.is_number_integer()) {
        tc.resolution = Eigen::Vector3i::Constant(r.get<int>());
      } else if (r.is_array() && r.size() == 3) {
        tc.resolution = Eigen::Vector3i(r[0].get<int>(), r[1].get<int>(), r[2].get<int>());
      } else {
        throw ValidationError("train.resolution must be an integer or [x, y, z]");
      }
    }
    read(t, "lr_density", tc.lr_density);
    read(t, "lr_color", tc.lr_color);
    read(t, "adam_beta1", tc.adam_beta1);
    read(t, "adam_beta2", tc.adam_beta2);
    read(t, "adam_epsilon", tc.adam_epsilon);
    read(t, "lr_final_factor", tc.lr_final_factor);
    read(t, "batch_rays", tc.batch_rays);
    read(t, "coarse_epochs", tc.coarse_epochs);
    read(t, "fine_epochs", tc.fine_epochs);
    read(t, "samples_per_ray", tc.samples_per_ray);
    read(t, "stratified", tc.stratified);
    read(t, "init_density", tc.init_density);
    read(t, "init_color", tc.init_color);
    read(t, "min_transmittance", tc.min_transmittance);
    if (t.contains("background")) {
      const json& b = t["background"];
      if (!b.is_array() || b.size() != 3) throw ValidationError("train.background must be [r, g, b]");
      tc.background = Eigen::Vector3d(b[0].get<double>(), b[1].get<double>(), b[2].get<double>());
    }
  }
  if (j.contains("guidance")) {
    const json& g = j["guidance"];
    check_keys(g, {"enabled", "s", "sigma", "cov", "loss", "start_epoch"}, "guidance");
    read(g, "enabled", c.guidance_enabled);
    read(g, "s", c.guidance.s);
    read(g, "start_epoch", c.guidance.start_epoch);
    if (g.contains("sigma") && !g["sigma"].is_null()) {
      const double sigma = g["sigma"].get<double>();
      c.guidance.covariance = Eigen::Matrix2d::Identity() * sigma * sigma;
    }
    if (g.contains("cov") && !g["cov"].is_null()) {
      const json& m = g["cov"];
      if (!m.is_array() || m.size() != 2 || m[0].size() != 2 || m[1].size() != 2)
        throw ValidationError("guidance.cov must be a 2x2 array");
      c.guidance.covariance << m[0][0].get<double>(), m[0][1].get<double>(), m[1][0].get<double>(),
          m[1][1].get<double>();
    }
    if (g.contains("loss")) c.guidance.loss = guided_loss_mode_from_string(g["loss"].get<std::string>());
  }
  if (j.contains("quadtree")) {
    const json& q = j["quadtree"];
    check_keys(q, {"enabled", "mu", "alpha", "s_sample", "s_divide", "min_area", "uniform_fraction"}, "quadtree");
    read(q, "enabled", c.quadtree_enabled);
    read(q, "mu", c.quadtree.mu);
    read(q, "alpha", c.quadtree.alpha);
    read(q, "s_sample", c.quadtree.s_sample);
    read(q, "s_divide", c.quadtree.s_divide);
    read(q, "min_area", c.quadtree.min_area);
    read(q, "uniform_fraction", c.quadtree.uniform_fraction);
  }
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    check_keys(m, {"samples_per_ray"}, "metrics");
    read(m, "samples_per_ray", c.eval_samples_per_ray);
  }
  c.train.seed = c.seed;
  return c;
}

RunConfig merge_run_config(const std::optional<std::filesystem::path>& file, const json& overrides) {
  json tree = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw IoError("cannot open config " + file->string());
    try {
      tree = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("config " + file->string() + ": " + e.what());
    }
  }
  if (!tree.is_object()) throw ValidationError("config root must be an object");
  tree.merge_patch(overrides);
  return run_config_from_json(tree);
}

}  // namespace clearfield
