#include "clearfield/field.hpp"

#include "clearfield/errors.hpp"

#include <algorithm>
#include <cmath>

namespace clearfield {

VoxelField::VoxelField(const Eigen::Vector3i& resolution, const Aabb& bbox, double init_density,
                       double init_color)
    : resolution_(resolution), bbox_(bbox) {
  if ((resolution.array() < 2).any()) throw ValidationError("field resolution must be >= 2 per axis");
  if (!(bbox.min.array() < bbox.max.array()).all()) throw ValidationError("field bbox is empty");
  if (!(init_density > 0.0) || !(init_color > 0.0 && init_color < 1.0))
    throw ValidationError("initial density must be > 0 and color in (0, 1)");
  const std::size_t n = static_cast<std::size_t>(resolution.x()) * resolution.y() * resolution.z();
  density_raw_.assign(n, softplus_inverse(init_density));
  color_raw_.assign(3 * n, logit(init_color));
}

Eigen::Vector3d VoxelField::grid_point(int x, int y, int z) const {
  const Eigen::Vector3d cell = bbox_.extent().cwiseQuotient((resolution_.array() - 1).cast<double>().matrix());
  return bbox_.min + Eigen::Vector3d(x, y, z).cwiseProduct(cell);
}

bool trilinear_stencil(const VoxelField& field, const Eigen::Vector3d& x, TrilinearStencil& out) {
  const Aabb& box = field.bbox();
  if (!box.contains(x)) return false;
  const Eigen::Vector3i& res = field.resolution();
  const Eigen::Vector3d g = (x - box.min).cwiseQuotient(box.extent()).cwiseProduct(
      (res.array() - 1).cast<double>().matrix());
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    i0[a] = std::clamp(static_cast<int>(std::floor(g[a])), 0, res[a] - 2);
    f[a] = g[a] - i0[a];
  }
  const std::size_t base = field.index(i0[0], i0[1], i0[2]);
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(res.x());
  const std::size_t sz = static_cast<std::size_t>(res.x()) * res.y();
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1;
    const int by = (c >> 1) & 1;
    const int bz = (c >> 2) & 1;
    out.index[c] = base + bx * sx + by * sy + bz * sz;
    out.weight[c] = (bx ? f[0] : 1.0 - f[0]) * (by ? f[1] : 1.0 - f[1]) * (bz ? f[2] : 1.0 - f[2]);
  }
  return true;
}

namespace {

struct RawSample {
  double density = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

RawSample interpolate(const VoxelField& field, const TrilinearStencil& s) {
  const auto d = field.density_raw();
  const auto c = field.color_raw();
  RawSample r;
  for (int k = 0; k < 8; ++k) {
    const double w = s.weight[k];
    const std::size_t i = s.index[k];
    r.density += w * d[i];
    r.color += w * Eigen::Vector3d(c[3 * i], c[3 * i + 1], c[3 * i + 2]);
  }
  return r;
}

Eigen::Vector3d activate_color(const Eigen::Vector3d& raw) {
  return {logistic(raw.x()), logistic(raw.y()), logistic(raw.z())};
}

// Parametric range [t0, t1] of the ray inside the box; empty when t0 > t1.
std::pair<double, double> box_interval(const Ray& ray, const Aabb& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (d == 0.0) {
      if (ray.origin[a] < box.min[a] || ray.origin[a] > box.max[a]) return {1.0, 0.0};
      continue;
    }
    double ta = (box.min[a] - ray.origin[a]) / d;
    double tb = (box.max[a] - ray.origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  // widened slightly; the exact containment test happens per sample
  return {t0 - 1e-9, t1 + 1e-9};
}

}  // namespace

FieldSample query_field(const VoxelField& field, const Eigen::Vector3d& x, const Eigen::Vector3d&) {
  TrilinearStencil s;
  if (!trilinear_stencil(field, x, s)) return {};
  const RawSample r = interpolate(field, s);
  return {softplus(r.density), activate_color(r.color)};
}

RaySampleSet sample_ray(const Ray& ray, int samples, Rng* rng) {
  if (samples < 1) throw ValidationError("samples per ray must be >= 1");
  RaySampleSet out;
  out.ray = ray;
  const double step = (ray.far - ray.near) / samples;
  out.t.resize(samples);
  out.deltas.assign(samples, step);
  for (int k = 0; k < samples; ++k) {
    const double jitter = rng ? rng->uniform() : 0.5;
    out.t[k] = ray.near + (k + jitter) * step;
  }
  return out;
}

RayRender render_ray(const VoxelField& field, const RaySampleSet& samples,
                     const Eigen::Vector3d& background, double min_transmittance) {
  const auto [t_in, t_out] = box_interval(samples.ray, field.bbox());
  RayRender out;
  double t = 1.0;
  TrilinearStencil s;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (t < min_transmittance) break;
    const double tk = samples.t[k];
    if (tk < t_in || tk > t_out) continue;
    if (!trilinear_stencil(field, samples.position(k), s)) continue;
    const RawSample r = interpolate(field, s);
    const double a = std::exp(-softplus(r.density) * samples.deltas[k]);
    out.color += (t * (1.0 - a)) * activate_color(r.color);
    t *= a;
  }
  out.transmittance = t;
  out.color += t * background;
  return out;
}

void FieldGradient::zero() {
  std::fill(density.begin(), density.end(), 0.0);
  std::fill(color.begin(), color.end(), 0.0);
}

FieldGradient& FieldGradient::operator+=(const FieldGradient& other) {
  for (std::size_t i = 0; i < density.size(); ++i) density[i] += other.density[i];
  for (std::size_t i = 0; i < color.size(); ++i) color[i] += other.color[i];
  return *this;
}

void RayTrace::clear() {
  stencils.clear();
  density_raw.clear();
  sigma.clear();
  delta.clear();
  color_raw.clear();
  color.clear();
  transmittance.clear();
  result = {};
}

const RayRender& trace_ray(const VoxelField& field, const RaySampleSet& samples,
                           const Eigen::Vector3d& background, double min_transmittance,
                           RayTrace& trace) {
  trace.clear();
  const auto [t_in, t_out] = box_interval(samples.ray, field.bbox());
  double t = 1.0;
  trace.transmittance.push_back(t);
  TrilinearStencil s;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (t < min_transmittance) break;
    const double tk = samples.t[k];
    if (tk < t_in || tk > t_out) continue;
    if (!trilinear_stencil(field, samples.position(k), s)) continue;
    const RawSample r = interpolate(field, s);
    const double sigma = softplus(r.density);
    const Eigen::Vector3d c = activate_color(r.color);
    const double a = std::exp(-sigma * samples.deltas[k]);
    trace.result.color += (t * (1.0 - a)) * c;
    t *= a;
    trace.stencils.push_back(s);
    trace.density_raw.push_back(r.density);
    trace.sigma.push_back(sigma);
    trace.delta.push_back(samples.deltas[k]);
    trace.color_raw.push_back(r.color);
    trace.color.push_back(c);
    trace.transmittance.push_back(t);
  }
  trace.result.transmittance = t;
  trace.result.color += t * background;
  trace.background = background;
  return trace.result;
}

void backprop_ray(const RayTrace& trace, const Eigen::Vector3d& dloss_dcolor, FieldGradient& grad) {
  const std::size_t n = trace.sigma.size();
  if (n == 0) return;
  thread_local std::vector<double> dsigma;
  thread_local std::vector<Eigen::Vector3d> dcolor;
  dsigma.resize(n);
  dcolor.resize(n);
  composite_backward<double>(trace.sigma, trace.delta, trace.color, trace.transmittance, trace.background,
                             dloss_dcolor, dsigma, dcolor);

  for (std::size_t k = 0; k < n; ++k) {
    const double draw_d = dsigma[k] * logistic(trace.density_raw[k]);
    const Eigen::Vector3d& c = trace.color[k];
    const Eigen::Vector3d draw_c = dcolor[k].cwiseProduct(c).cwiseProduct(Eigen::Vector3d::Ones() - c);
    const TrilinearStencil& s = trace.stencils[k];
    for (int j = 0; j < 8; ++j) {
      const double w = s.weight[j];
      if (w == 0.0) continue;
      const std::size_t i = s.index[j];
      grad.density[i] += w * draw_d;
      grad.color[3 * i] += w * draw_c.x();
      grad.color[3 * i + 1] += w * draw_c.y();
      grad.color[3 * i + 2] += w * draw_c.z();
    }
  }
}

double reconstruction_loss(const ImageBuffer& rendered, const ImageBuffer& target) {
  if (!rendered.same_shape(target)) throw ValidationError("loss requires images of equal size");
  if (rendered.empty()) return 0.0;
  return (rendered.array() - target.array()).square().mean();
}

RayBatchResult backward_rays(const VoxelField& field, std::span<const Ray> rays,
                             std::span<const Eigen::Vector3d> targets, const RenderOptions& options) {
  if (rays.size() != targets.size()) throw ValidationError("one target color per ray required");
  RayBatchResult out;
  out.gradient = FieldGradient(field);
  if (rays.empty()) return out;
  const double norm = 1.0 / (3.0 * static_cast<double>(rays.size()));
  RayTrace trace;
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const RaySampleSet samples = sample_ray(rays[r], options.samples_per_ray);
    const RayRender& render =
        trace_ray(field, samples, options.background, options.min_transmittance, trace);
    const Eigen::Vector3d diff = render.color - targets[r];
    out.loss += diff.squaredNorm() * norm;
    backprop_ray(trace, norm * (2.0 * diff), out.gradient);
  }
  return out;
}

ImageBuffer render_view(const VoxelField& field, const CameraView& view, const RenderOptions& options) {
  ImageBuffer img(view.width, view.height);
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      const RaySampleSet samples =
          sample_ray(camera_ray(view, x + 0.5, y + 0.5), options.samples_per_ray);
      img.set_pixel(x, y,
                    render_ray(field, samples, options.background, options.min_transmittance).color);
    }
  }
  return img.clamp();
}

}  // namespace clearfield
