#include "clearfield/trainer.hpp"

#include "clearfield/errors.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace clearfield {

void TrainConfig::validate() const {
  if ((resolution.array() < 2).any()) throw ValidationError("field resolution must be >= 2 per axis");
  if (!(lr_density > 0.0) || !(lr_color > 0.0)) throw ValidationError("learning rates must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw ValidationError("Adam betas must lie in (0, 1)");
  if (!(lr_final_factor > 0.0 && lr_final_factor <= 1.0))
    throw ValidationError("lr_final_factor must lie in (0, 1]");
  if (batch_rays < 1 || samples_per_ray < 1) throw ValidationError("batch and sample counts must be positive");
  if (coarse_epochs < 0 || fine_epochs < 0) throw ValidationError("epoch counts must be non-negative");
  if (min_transmittance < 0.0 || min_transmittance >= 1.0)
    throw ValidationError("min_transmittance must lie in [0, 1)");
}

Adam::Adam(std::size_t size, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const double step = lr / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    // zero state with zero gradient stays zero: skipping it is exact
    if (g == 0.0 && m_[i] == 0.0 && v_[i] == 0.0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_c2 + epsilon_);
  }
}

double cosine_lr(double lr, double final_factor, double progress) {
  const double p = std::clamp(progress, 0.0, 1.0);
  return lr * (final_factor + (1.0 - final_factor) * 0.5 * (1.0 + std::cos(std::numbers::pi * p)));
}

std::int64_t TrainLog::total_rays() const {
  std::int64_t n = 0;
  for (const auto& e : epochs) n += e.rays_used;
  return n;
}

std::int64_t TrainLog::fine_rays() const {
  std::int64_t n = 0;
  for (const auto& e : epochs)
    if (e.fine) n += e.rays_used;
  return n;
}

std::int64_t TrainLog::total_iterations() const {
  std::int64_t n = 0;
  for (const auto& e : epochs) n += e.iterations;
  return n;
}

double TrainLog::total_seconds() const {
  double s = 0.0;
  for (const auto& e : epochs) s += e.seconds;
  return s;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

TrainResult train(const SceneSet& scene, const TrainConfig& config,
                  const std::optional<GuidanceConfig>& guidance,
                  const std::optional<QuadtreeSettings>& quadtree) {
  config.validate();
  scene.validate();
  if (quadtree && !guidance) throw ValidationError("quadtree planning requires guidance");

  TrainResult result{VoxelField(config.resolution, scene.bbox, config.init_density, config.init_color), {}, {}};
  VoxelField& field = result.field;
  Adam adam_density(field.voxel_count(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  Adam adam_color(3 * field.voxel_count(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  FieldGradient grad(field);

  const PseudoPixelPattern center = make_pattern(1, Eigen::Matrix2d::Identity());
  const PseudoPixelPattern pattern = guidance ? make_pattern(guidance->s, guidance->covariance) : center;

  std::vector<std::vector<double>> importance;
  std::vector<std::vector<double>> probabilities;
  if (quadtree) {
    for (const ImageBuffer& img : scene.images) {
      result.trees.push_back(Quadtree::init(img.width(), img.height(), quadtree->min_area));
      importance.push_back(importance_map(img));
      probabilities.push_back(leaf_probabilities(result.trees.back(), importance.back()));
    }
  }

  std::vector<PlannedPixel> all_pixels;
  for (int v = 0; v < static_cast<int>(scene.size()); ++v)
    for (int y = 0; y < scene.images[v].height(); ++y)
      for (int x = 0; x < scene.images[v].width(); ++x) all_pixels.push_back({v, x, y});

  const int total_epochs = config.coarse_epochs + config.fine_epochs;
  std::vector<RayTrace> traces(pattern.size());
  RaySampleSet samples;
  std::int64_t global_step = 0;

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.fine = epoch >= config.coarse_epochs;
    log.supersampled = log.fine && guidance && (epoch - config.coarse_epochs) >= guidance->start_epoch;
    const bool planned = log.supersampled && quadtree.has_value();
    const PseudoPixelPattern& active = log.supersampled ? pattern : center;
    const GuidedLossMode loss_mode = log.supersampled ? guidance->loss : GuidedLossMode::l2;

    Rng epoch_rng = Rng::stream(config.seed, "epoch", static_cast<std::uint64_t>(epoch));
    std::vector<PlannedPixel> pixels;
    if (planned) {
      EpochPlan plan = plan_epoch(result.trees, probabilities, *quadtree, epoch_rng,
                                  static_cast<int>(active.size()));
      pixels = std::move(plan.pixels);
      pixels.insert(pixels.end(), plan.uniform_pixels.begin(), plan.uniform_pixels.end());
    } else {
      pixels = all_pixels;
    }
    shuffle(pixels, epoch_rng);

    const std::size_t per_step =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_rays) / active.size());
    const std::size_t steps = (pixels.size() + per_step - 1) / per_step;
    double loss_sum = 0.0;

    for (std::size_t step = 0; step < steps; ++step, ++global_step) {
      Rng ray_rng = Rng::stream(config.seed, "rays", static_cast<std::uint64_t>(global_step));
      const std::size_t begin = step * per_step;
      const std::size_t end = std::min(pixels.size(), begin + per_step);
      const double norm = 1.0 / (3.0 * static_cast<double>(end - begin));
      grad.zero();

      for (std::size_t p = begin; p < end; ++p) {
        const PlannedPixel& px = pixels[p];
        const CameraView& view = scene.views[px.view];
        Eigen::Vector3d blended = Eigen::Vector3d::Zero();
        for (std::size_t k = 0; k < active.size(); ++k) {
          const Ray ray = camera_ray(view, px.x + 0.5 + active.offsets[k].x(), px.y + 0.5 + active.offsets[k].y());
          samples = sample_ray(ray, config.samples_per_ray, config.stratified ? &ray_rng : nullptr);
          blended += active.weights[k] *
                     trace_ray(field, samples, config.background, config.min_transmittance, traces[k]).color;
        }
        Eigen::Vector3d dloss;
        const double l = pixel_loss(blended, scene.images[px.view].pixel(px.x, px.y), loss_mode, &dloss);
        loss_sum += l / 3.0;
        for (std::size_t k = 0; k < active.size(); ++k)
          backprop_ray(traces[k], (active.weights[k] * norm) * dloss, grad);
        if (planned) result.trees[px.view].record_loss(px.x, px.y, l / 3.0);
      }

      const double progress = (epoch + static_cast<double>(step) / steps) / total_epochs;
      adam_density.step(field.density_raw(), grad.density,
                        cosine_lr(config.lr_density, config.lr_final_factor, progress));
      adam_color.step(field.color_raw(), grad.color, cosine_lr(config.lr_color, config.lr_final_factor, progress));
    }

    if (planned) {
      for (std::size_t v = 0; v < result.trees.size(); ++v) {
        result.trees[v].subdivide_pass(quadtree->s_divide, quadtree->min_area);
        probabilities[v] = leaf_probabilities(result.trees[v], importance[v]);
      }
    }

    log.pixels = static_cast<std::int64_t>(pixels.size());
    log.rays_used = log.pixels * static_cast<std::int64_t>(active.size());
    log.iterations = static_cast<std::int64_t>(steps);
    log.loss = pixels.empty() ? 0.0 : loss_sum / static_cast<double>(pixels.size());
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(log);
  }
  return result;
}

}  // namespace clearfield
