#include "clearfield/degradation.hpp"

#include "clearfield/errors.hpp"
#include "clearfield/jpeg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace clearfield {

using nlohmann::json;

namespace {

constexpr KernelFamily kBlurFamilies[] = {
    KernelFamily::iso,         KernelFamily::aniso,        KernelFamily::generalized_iso,
    KernelFamily::generalized_aniso, KernelFamily::plateau_iso, KernelFamily::plateau_aniso,
};
constexpr ResizeMode kResizeModes[] = {ResizeMode::area, ResizeMode::bilinear, ResizeMode::bicubic};

constexpr double kUsmSigma = 1.5;
constexpr int kUsmRadius = 7;
constexpr double kUsmWeight = 0.5;
constexpr double kUsmThreshold = 10.0 / 255.0;

bool is_anisotropic(KernelFamily f) {
  return f == KernelFamily::aniso || f == KernelFamily::generalized_aniso ||
         f == KernelFamily::plateau_aniso;
}

KernelSpec sample_blur(Rng& rng, int size) {
  using namespace ranges;
  KernelSpec k;
  k.family = kBlurFamilies[rng.uniform_int(0, 5)];
  k.size = size;
  k.sigma_x = rng.uniform(kSigmaMin, kSigmaMax);
  if (is_anisotropic(k.family)) {
    k.sigma_y = rng.uniform(kSigmaMin, kSigmaMax);
    k.rotation = rng.uniform(-std::numbers::pi, std::numbers::pi);
  } else {
    k.sigma_y = k.sigma_x;
  }
  if (k.family == KernelFamily::generalized_iso || k.family == KernelFamily::generalized_aniso)
    k.beta = rng.uniform(kBetaGeneralizedMin, kBetaGeneralizedMax);
  else if (k.family == KernelFamily::plateau_iso || k.family == KernelFamily::plateau_aniso)
    k.beta = rng.uniform(kBetaPlateauMin, kBetaPlateauMax);
  return k;
}

StageParams sample_stage(Rng& rng, int kernel_size) {
  using namespace ranges;
  StageParams s;
  s.blur = sample_blur(rng, kernel_size);
  s.resize_scale = rng.uniform(kResizeScaleMin, kResizeScaleMax);
  s.resize_mode = kResizeModes[rng.uniform_int(0, 2)];
  s.noise.kind = rng.bernoulli(0.5) ? NoiseKind::gaussian : NoiseKind::poisson;
  s.noise.gray = rng.bernoulli(kGrayNoiseProbability);
  s.noise.strength = s.noise.kind == NoiseKind::gaussian
                         ? rng.uniform(kGaussianSigmaMin, kGaussianSigmaMax)
                         : rng.uniform(kPoissonScaleMin, kPoissonScaleMax);
  s.jpeg_quality = static_cast<int>(rng.uniform_int(kJpegQualityMin, kJpegQualityMax));
  return s;
}

void check(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("invalid degradation parameters: ") + what);
}

void validate_stage(const StageParams& s, int kernel_size) {
  using namespace ranges;
  check(s.blur.size == kernel_size, "stage kernel size differs from scene kernel size");
  check(s.blur.family != KernelFamily::sinc, "stage blur cannot be sinc");
  check(s.blur.sigma_x > 0.0 && s.blur.sigma_y > 0.0, "sigma must be positive");
  check(s.resize_scale >= kResizeScaleMin && s.resize_scale <= kResizeScaleMax,
        "resize scale out of range");
  check(s.jpeg_quality >= kJpegQualityMin && s.jpeg_quality <= kJpegQualityMax,
        "jpeg quality out of range");
  check(s.noise.strength >= 0.0, "noise strength must be non-negative");
}

json kernel_to_json(const KernelSpec& k) {
  return {{"family", to_string(k.family)}, {"size", k.size},         {"sigma_x", k.sigma_x},
          {"sigma_y", k.sigma_y},          {"rotation", k.rotation}, {"beta", k.beta},
          {"cutoff", k.cutoff}};
}

KernelSpec kernel_from_json(const json& j) {
  KernelSpec k;
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  k.size = j.at("size").get<int>();
  k.sigma_x = j.at("sigma_x").get<double>();
  k.sigma_y = j.at("sigma_y").get<double>();
  k.rotation = j.at("rotation").get<double>();
  k.beta = j.at("beta").get<double>();
  k.cutoff = j.at("cutoff").get<double>();
  return k;
}

json stage_to_json(const StageParams& s) {
  return {{"blur", kernel_to_json(s.blur)},
          {"resize_scale", s.resize_scale},
          {"resize_mode", to_string(s.resize_mode)},
          {"noise",
           {{"kind", s.noise.kind == NoiseKind::gaussian ? "gaussian" : "poisson"},
            {"gray", s.noise.gray},
            {"strength", s.noise.strength}}},
          {"jpeg_quality", s.jpeg_quality}};
}

StageParams stage_from_json(const json& j) {
  StageParams s;
  s.blur = kernel_from_json(j.at("blur"));
  s.resize_scale = j.at("resize_scale").get<double>();
  s.resize_mode = resize_mode_from_string(j.at("resize_mode").get<std::string>());
  const json& n = j.at("noise");
  const auto kind = n.at("kind").get<std::string>();
  if (kind != "gaussian" && kind != "poisson") throw ValidationError("unknown noise kind " + kind);
  s.noise.kind = kind == "gaussian" ? NoiseKind::gaussian : NoiseKind::poisson;
  s.noise.gray = n.at("gray").get<bool>();
  s.noise.strength = n.at("strength").get<double>();
  s.jpeg_quality = j.at("jpeg_quality").get<int>();
  return s;
}

std::vector<double> residual(const ImageBuffer& after, const ImageBuffer& before) {
  std::vector<double> r(after.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = after.data()[i] - before.data()[i];
  return r;
}

}  // namespace

DegradationParams sample_params(std::uint64_t seed, int target_width, int target_height) {
  using namespace ranges;
  Rng rng = Rng::stream(seed, "theta");
  DegradationParams theta;
  theta.seed = seed;
  theta.kernel_size = 2 * static_cast<int>(rng.uniform_int(kKernelSizeMin / 2, kKernelSizeMax / 2)) + 1;
  theta.stage1 = sample_stage(rng, theta.kernel_size);
  theta.stage2 = sample_stage(rng, theta.kernel_size);
  theta.final_order = rng.bernoulli(0.5) ? FinalOrder::resize_sinc_jpeg : FinalOrder::jpeg_resize_sinc;
  theta.final_sinc.family = KernelFamily::sinc;
  theta.final_sinc.size = theta.kernel_size;
  theta.final_sinc.cutoff = rng.uniform(std::numbers::pi / 3.0, std::numbers::pi);
  theta.final_resize_mode = kResizeModes[rng.uniform_int(0, 2)];
  theta.final_jpeg_quality = static_cast<int>(rng.uniform_int(kJpegQualityMin, kJpegQualityMax));
  theta.target_width = target_width;
  theta.target_height = target_height;
  return theta;
}

void validate_params(const DegradationParams& theta) {
  using namespace ranges;
  check(theta.kernel_size % 2 == 1 && theta.kernel_size >= kKernelSizeMin &&
            theta.kernel_size <= kKernelSizeMax,
        "kernel size must be odd in [7, 21]");
  validate_stage(theta.stage1, theta.kernel_size);
  validate_stage(theta.stage2, theta.kernel_size);
  check(theta.final_sinc.family == KernelFamily::sinc, "final filter must be sinc");
  check(theta.final_sinc.size == theta.kernel_size, "final sinc size differs from scene kernel size");
  check(theta.final_sinc.cutoff > 0.0, "sinc cutoff must be positive");
  check(theta.final_jpeg_quality >= kJpegQualityMin && theta.final_jpeg_quality <= kJpegQualityMax,
        "final jpeg quality out of range");
  check(theta.target_width >= 1 && theta.target_height >= 1, "target size must be positive");
}

json params_to_json(const DegradationParams& theta) {
  return {{"seed", theta.seed},
          {"kernel_size", theta.kernel_size},
          {"stage1", stage_to_json(theta.stage1)},
          {"stage2", stage_to_json(theta.stage2)},
          {"final_order",
           theta.final_order == FinalOrder::resize_sinc_jpeg ? "resize_sinc_jpeg" : "jpeg_resize_sinc"},
          {"final_sinc", kernel_to_json(theta.final_sinc)},
          {"final_resize_mode", to_string(theta.final_resize_mode)},
          {"final_jpeg_quality", theta.final_jpeg_quality},
          {"target_width", theta.target_width},
          {"target_height", theta.target_height}};
}

DegradationParams params_from_json(const json& j) {
  DegradationParams theta;
  try {
    theta.seed = j.at("seed").get<std::uint64_t>();
    theta.kernel_size = j.at("kernel_size").get<int>();
    theta.stage1 = stage_from_json(j.at("stage1"));
    theta.stage2 = stage_from_json(j.at("stage2"));
    const auto order = j.at("final_order").get<std::string>();
    if (order == "resize_sinc_jpeg")
      theta.final_order = FinalOrder::resize_sinc_jpeg;
    else if (order == "jpeg_resize_sinc")
      theta.final_order = FinalOrder::jpeg_resize_sinc;
    else
      throw ValidationError("unknown final order " + order);
    theta.final_sinc = kernel_from_json(j.at("final_sinc"));
    theta.final_resize_mode = resize_mode_from_string(j.at("final_resize_mode").get<std::string>());
    theta.final_jpeg_quality = j.at("final_jpeg_quality").get<int>();
    theta.target_width = j.at("target_width").get<int>();
    theta.target_height = j.at("target_height").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed degradation parameters: ") + e.what());
  }
  return theta;
}

ImageBuffer usm_sharpen(const ImageBuffer& img) {
  const ImageBuffer blurred = convolve(img, gaussian_kernel(kUsmSigma, kUsmRadius));
  ImageBuffer out = img;
  auto o = out.data();
  const auto b = blurred.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double r = o[i] - b[i];
    if (std::abs(r) > kUsmThreshold) o[i] = std::clamp(o[i] + kUsmWeight * r, 0.0, 1.0);
  }
  return out;
}

ImageBuffer add_noise(const ImageBuffer& img, const NoiseSpec& noise, Rng& rng) {
  ImageBuffer out = img;
  if (noise.strength == 0.0) return out;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Eigen::Vector3d c = img.pixel(x, y);
      Eigen::Vector3d n;
      if (noise.kind == NoiseKind::gaussian) {
        if (noise.gray)
          n.setConstant(rng.normal());
        else
          n = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
        n *= noise.strength;
      } else {
        auto shot = [&](double v) {
          return static_cast<double>(rng.poisson(v * kPoissonLevels)) / kPoissonLevels - v;
        };
        if (noise.gray)
          n.setConstant(shot(0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]));
        else
          n = Eigen::Vector3d(shot(c[0]), shot(c[1]), shot(c[2]));
        n *= noise.strength;
      }
      out.set_pixel(x, y, (c + n).cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  return out;
}

ImageBuffer degrade_image(const ImageBuffer& img, const DegradationParams& theta, Rng& rng,
                          DegradationTrace* trace) {
  validate_params(theta);
  ImageBuffer x = usm_sharpen(img);

  for (const StageParams* stage : {&theta.stage1, &theta.stage2}) {
    const Eigen::MatrixXd kernel = build_kernel(stage->blur);
    x = convolve(x, kernel).clamp();
    x = resize(x, stage->resize_scale, stage->resize_mode);
    const ImageBuffer before_noise = x;
    x = add_noise(x, stage->noise, rng);
    if (trace) {
      trace->kernels.push_back(kernel);
      trace->sizes.emplace_back(x.width(), x.height());
      trace->noise_residuals.push_back(residual(x, before_noise));
      trace->jpeg_qualities.push_back(stage->jpeg_quality);
    }
    x = jpeg_roundtrip(x, stage->jpeg_quality);
  }

  const Eigen::MatrixXd sinc = build_kernel(theta.final_sinc);
  auto final_resize = [&] {
    x = resize_to(x, theta.target_width, theta.target_height, theta.final_resize_mode);
  };
  if (theta.final_order == FinalOrder::resize_sinc_jpeg) {
    final_resize();
    x = convolve(x, sinc).clamp();
    x = jpeg_roundtrip(x, theta.final_jpeg_quality);
  } else {
    x = jpeg_roundtrip(x, theta.final_jpeg_quality);
    final_resize();
    x = convolve(x, sinc).clamp();
  }
  if (trace) {
    trace->kernels.push_back(sinc);
    trace->sizes.emplace_back(x.width(), x.height());
    trace->jpeg_qualities.push_back(theta.final_jpeg_quality);
  }
  return x;
}

DegradedScene degrade_scene(const SceneSet& scene, std::uint64_t seed,
                            std::optional<std::pair<int, int>> target) {
  scene.validate();
  const auto [tw, th] = target.value_or(std::pair{scene.width(), scene.height()});
  DegradedScene out;
  out.theta = sample_params(seed, tw, th);
  out.scene.bbox = scene.bbox;
  out.scene.camera_angle_x = scene.camera_angle_x;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    Rng rng = Rng::stream(seed, "view", i);
    DegradationTrace trace;
    out.scene.images.push_back(degrade_image(scene.images[i], out.theta, rng, &trace));
    out.traces.push_back(std::move(trace));

    CameraView view = scene.views[i];
    const double sx = static_cast<double>(tw) / view.width;
    const double sy = static_cast<double>(th) / view.height;
    view.intrinsics.fx *= sx;
    view.intrinsics.cx *= sx;
    view.intrinsics.fy *= sy;
    view.intrinsics.cy *= sy;
    view.width = tw;
    view.height = th;
    out.scene.views.push_back(std::move(view));
  }
  return out;
}

std::vector<Triplet> sample_triplets(int frames, std::uint64_t seed, int count) {
  if (frames < 3) throw ValidationError("triplet synthesis needs at least 3 frames");
  if (count < 0) throw ValidationError("triplet count must be non-negative");
  Rng rng = Rng::stream(seed, "triplets");
  std::vector<Triplet> out;
  out.reserve(count);
  for (int n = 0; n < count; ++n) {
    Triplet t;
    t.target = static_cast<int>(rng.uniform_int(0, frames - 1));
    do {
      t.ref_j = static_cast<int>(rng.uniform_int(0, frames - 1));
    } while (t.ref_j == t.target);
    do {
      t.ref_k = static_cast<int>(rng.uniform_int(0, frames - 1));
    } while (t.ref_k == t.target || t.ref_k == t.ref_j);
    out.push_back(t);
  }
  return out;
}

TripletSet synth_restoration_triplets(const SceneSet& clip, std::uint64_t seed, int count,
                                      const std::optional<std::filesystem::path>& out_dir) {
  if (clip.size() < 3) throw ValidationError("triplet synthesis needs at least 3 frames");
  TripletSet set;
  set.triplets = sample_triplets(static_cast<int>(clip.size()), seed, count);
  set.degraded = degrade_scene(clip, seed);
  set.clean = clip.images;
  if (!out_dir) return set;

  namespace fs = std::filesystem;
  fs::create_directories(*out_dir / "degraded");
  fs::create_directories(*out_dir / "clean");
  auto name = [](const char* dir, int i) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s/r_%03d.png", dir, i);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < clip.size(); ++i) {
    save_image(set.degraded.scene.images[i], *out_dir / name("degraded", static_cast<int>(i)));
    save_image(set.clean[i], *out_dir / name("clean", static_cast<int>(i)));
  }
  std::ofstream lines(*out_dir / "triplets.jsonl");
  if (!lines) throw IoError("cannot write triplet manifest in '" + out_dir->string() + "'");
  for (const Triplet& t : set.triplets) {
    lines << json{{"i", t.target},
                  {"j", t.ref_j},
                  {"k", t.ref_k},
                  {"degraded_i", name("degraded", t.target)},
                  {"degraded_j", name("degraded", t.ref_j)},
                  {"degraded_k", name("degraded", t.ref_k)},
                  {"clean", name("clean", t.target)}}
                 .dump()
          << "\n";
  }
  std::ofstream theta(*out_dir / "theta.json");
  theta << params_to_json(set.degraded.theta).dump(2) << "\n";
  return set;
}

}  // namespace clearfield
