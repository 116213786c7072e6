#include "clearfield/metrics.hpp"

#include "clearfield/errors.hpp"
#include "clearfield/kernels.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace clearfield {

using nlohmann::json;

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b) || a.empty()) throw ValidationError("psnr requires non-empty images of equal size");
  const double mse = (a.array() - b.array()).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  constexpr int kWindow = 11;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (!a.same_shape(b)) throw ValidationError("ssim requires images of equal size");
  if (std::min(a.width(), a.height()) < kWindow) throw ValidationError("ssim requires images of at least 11x11");

  const Eigen::MatrixXd window = gaussian_kernel(1.5, kWindow / 2);
  const int ow = a.width() - kWindow + 1;
  const int oh = a.height() - kWindow + 1;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int wy = 0; wy < kWindow; ++wy) {
          for (int wx = 0; wx < kWindow; ++wx) {
            const double w = window(wy, wx);
            const double va = a(x + wx, y + wy, c);
            const double vb = b(x + wx, y + wy, c);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double var_a = saa - ma * ma;
        const double var_b = sbb - mb * mb;
        const double cov = sab - ma * mb;
        total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                 ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
      }
    }
  }
  return total / (3.0 * ow * oh);
}

void EvalReport::finalize() {
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  mean_psnr = mean(psnr);
  mean_ssim = mean(ssim);
}

namespace {

// Infinite PSNR is written as null with a flag.
json psnr_value(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

double psnr_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

json EvalReport::to_json() const {
  json views = json::array();
  for (std::size_t i = 0; i < psnr.size(); ++i)
    views.push_back({{"view", i},
                     {"psnr", psnr_value(psnr[i])},
                     {"psnr_infinite", std::isinf(psnr[i])},
                     {"ssim", ssim[i]},
                     {"lpips", nullptr}});
  return {{"views", views},
          {"mean_psnr", psnr_value(mean_psnr)},
          {"mean_psnr_infinite", std::isinf(mean_psnr)},
          {"mean_ssim", mean_ssim},
          {"mean_lpips", nullptr},
          {"rays_used", rays_used},
          {"train_seconds", train_seconds ? json(*train_seconds) : json(nullptr)}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  try {
    for (const auto& v : j.at("views")) {
      r.psnr.push_back(psnr_from(v.at("psnr")));
      r.ssim.push_back(v.at("ssim").get<double>());
    }
    r.mean_psnr = psnr_from(j.at("mean_psnr"));
    r.mean_ssim = j.at("mean_ssim").get<double>();
    r.rays_used = j.at("rays_used").get<std::int64_t>();
    if (!j.at("train_seconds").is_null()) r.train_seconds = j.at("train_seconds").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

EvalReport evaluate(const VoxelField& field, const SceneSet& holdout, const RenderOptions& options) {
  if (holdout.views.empty()) throw ValidationError("evaluation needs at least one holdout view");
  holdout.validate();
  EvalReport report;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    const ImageBuffer rendered = render_view(field, holdout.views[i], options);
    report.psnr.push_back(psnr(rendered, holdout.images[i]));
    report.ssim.push_back(ssim(rendered, holdout.images[i]));
  }
  report.finalize();
  return report;
}

}  // namespace clearfield
