#pragma once

#include "clearfield/image.hpp"
#include "clearfield/kernels.hpp"
#include "clearfield/resample.hpp"
#include "clearfield/rng.hpp"
#include "clearfield/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace clearfield {

enum class NoiseKind { gaussian, poisson };

/// gaussian: strength is the standard deviation on the [0, 1] scale.
/// poisson: strength scales the shot-noise residual of an image with
/// kPoissonLevels photon levels, i.e. out = img + strength * (P(img L)/L - img).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  bool gray = false;
  double strength = 0.0;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

inline constexpr double kPoissonLevels = 256.0;

struct StageParams {
  KernelSpec blur;
  double resize_scale = 1.0;
  ResizeMode resize_mode = ResizeMode::area;
  NoiseSpec noise;
  int jpeg_quality = 95;

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

enum class FinalOrder { resize_sinc_jpeg, jpeg_resize_sinc };

/// One sampled point of the degradation space, shared by every view of a scene.
struct DegradationParams {
  std::uint64_t seed = 0;
  int kernel_size = 7;
  StageParams stage1;
  StageParams stage2;
  FinalOrder final_order = FinalOrder::resize_sinc_jpeg;
  KernelSpec final_sinc;
  ResizeMode final_resize_mode = ResizeMode::area;
  int final_jpeg_quality = 95;
  int target_width = 0;
  int target_height = 0;

  friend bool operator==(const DegradationParams&, const DegradationParams&) = default;
};

/// Parameter ranges of the degradation space.
namespace ranges {
inline constexpr int kKernelSizeMin = 7;
inline constexpr int kKernelSizeMax = 21;
inline constexpr double kSigmaMin = 0.2;
inline constexpr double kSigmaMax = 3.0;
inline constexpr double kBetaGeneralizedMin = 0.5;
inline constexpr double kBetaGeneralizedMax = 4.0;
inline constexpr double kBetaPlateauMin = 1.0;
inline constexpr double kBetaPlateauMax = 2.0;
inline constexpr double kResizeScaleMin = 0.15;
inline constexpr double kResizeScaleMax = 1.5;
inline constexpr double kGaussianSigmaMin = 1.0 / 255.0;
inline constexpr double kGaussianSigmaMax = 30.0 / 255.0;
inline constexpr double kPoissonScaleMin = 0.05;
inline constexpr double kPoissonScaleMax = 3.0;
inline constexpr double kGrayNoiseProbability = 0.4;
inline constexpr int kJpegQualityMin = 30;
inline constexpr int kJpegQualityMax = 95;
}  // namespace ranges

DegradationParams sample_params(std::uint64_t seed, int target_width, int target_height);

/// Throws ValidationError if any field is outside its range or the kernel
/// sizes disagree.
void validate_params(const DegradationParams& theta);

nlohmann::json params_to_json(const DegradationParams& theta);
DegradationParams params_from_json(const nlohmann::json& j);

/// Unsharp mask: Gaussian blur sigma 1.5 radius 7, weight 0.5, applied only
/// where |img - blur| > 10/255 (per channel).
ImageBuffer usm_sharpen(const ImageBuffer& img);

ImageBuffer add_noise(const ImageBuffer& img, const NoiseSpec& noise, Rng& rng);

/// What one degrade_image call realized; used to audit scene consistency.
struct DegradationTrace {
  std::vector<Eigen::MatrixXd> kernels;          // stage1, stage2, final sinc
  std::vector<std::pair<int, int>> sizes;        // after each resize
  std::vector<int> jpeg_qualities;               // stage1, stage2, final
  std::vector<std::vector<double>> noise_residuals;  // out - in per noise stage
};

/// USM -> stage1 (blur, resize, noise, jpeg) -> stage2 -> final stage in
/// theta.final_order, ending at the target size. Parameters come from theta,
/// noise draws from rng.
ImageBuffer degrade_image(const ImageBuffer& img, const DegradationParams& theta, Rng& rng,
                          DegradationTrace* trace = nullptr);

struct DegradedScene {
  SceneSet scene;
  DegradationParams theta;
  std::vector<DegradationTrace> traces;
};

/// One theta for the whole scene; view i draws noise from stream (seed, "view", i).
/// Intrinsics are rescaled when the target size differs from the input.
DegradedScene degrade_scene(const SceneSet& scene, std::uint64_t seed,
                            std::optional<std::pair<int, int>> target = std::nullopt);

struct Triplet {
  int target = 0;
  int ref_j = 0;
  int ref_k = 0;
};

/// `count` draws of pairwise distinct (i, j, k) over `frames` frames.
std::vector<Triplet> sample_triplets(int frames, std::uint64_t seed, int count);

struct TripletSet {
  DegradedScene degraded;
  std::vector<Triplet> triplets;
  std::vector<ImageBuffer> clean;
};

/// Degrades the clip and draws restoration training triplets. When `out_dir`
/// is given, writes degraded/clean frames and `triplets.jsonl`.
TripletSet synth_restoration_triplets(const SceneSet& clip, std::uint64_t seed, int count,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace clearfield
