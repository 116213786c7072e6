#include "oracles.hpp"
#include "support.hpp"

#include "clearfield/errors.hpp"
#include "clearfield/metrics.hpp"
#include "clearfield/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace clearfield;
using testsupport::ssim_oracle;

namespace {

ImageBuffer add_noise(const ImageBuffer& img, double sigma, Rng& rng) {
  ImageBuffer out = img;
  for (double& v : out.data()) v += sigma * rng.normal();
  return out;
}

}  // namespace

TEST_SUITE("psnr") {
  TEST_CASE("identical images are infinite") {
    Rng rng(60);
    const ImageBuffer a = testsupport::random_image(8, 8, rng);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  }

  TEST_CASE("a uniform 0.1 offset is 20 dB") {
    const ImageBuffer a(10, 6, 0.5), b(10, 6, 0.4);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  }

  TEST_CASE("double-loop oracle and symmetry") {
    Rng rng(61);
    const ImageBuffer a = testsupport::random_image(13, 9, rng), b = testsupport::random_image(13, 9, rng);
    double sum = 0.0;
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 13; ++x)
        for (int c = 0; c < 3; ++c) sum += (a(x, y, c) - b(x, y, c)) * (a(x, y, c) - b(x, y, c));
    CHECK(std::abs(psnr(a, b) - 10 * std::log10(1.0 / (sum / (13 * 9 * 3)))) <= 1e-9);
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK_THROWS_AS(psnr(a, ImageBuffer(9, 13)), ValidationError);
  }

  TEST_CASE("more noise means lower psnr") {
    Rng rng(62);
    const ImageBuffer clean = testsupport::random_image(32, 32, rng);
    double previous = std::numeric_limits<double>::infinity();
    for (double sigma : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}) {
      double mean = 0.0;
      for (int t = 0; t < 10; ++t) mean += psnr(add_noise(clean, sigma, rng), clean) / 10;
      CHECK(mean < previous);
      previous = mean;
    }
  }
}

TEST_SUITE("ssim") {
  TEST_CASE("identical images score one") {
    Rng rng(63);
    const ImageBuffer a = testsupport::random_image(20, 17, rng);
    CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-12);
  }

  TEST_CASE("an inverted binary image anti-correlates") {
    Rng rng(64);
    ImageBuffer a(24, 24, 0.0), inv(24, 24, 0.0);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) {
        const double v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        a.set_pixel(x, y, Eigen::Vector3d::Constant(v));
        inv.set_pixel(x, y, Eigen::Vector3d::Constant(1.0 - v));
      }
    CHECK(ssim(a, inv) < 0.0);
  }

  TEST_CASE("direct summation oracle and symmetry") {
    Rng rng(65);
    const ImageBuffer a = testsupport::random_image(32, 32, rng);
    const ImageBuffer b = add_noise(a, 0.1, rng);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-9);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
    const ImageBuffer tex = load_image(testsupport::data_dir() / "texture_scene.png");
    const ImageBuffer blurred = add_noise(tex, 0.03, rng);
    CHECK(std::abs(ssim(tex, blurred) - ssim_oracle(tex, blurred)) <= 1e-9);
  }

  TEST_CASE("small or mismatched images are rejected") {
    CHECK_THROWS_AS(ssim(ImageBuffer(10, 40), ImageBuffer(10, 40)), ValidationError);
    CHECK_THROWS_AS(ssim(ImageBuffer(20, 20), ImageBuffer(21, 20)), ValidationError);
  }
}

TEST_SUITE("evaluation reports") {
  TEST_CASE("means follow the per-view entries") {
    EvalReport r;
    r.psnr = {20.0, 30.0, 31.0};
    r.ssim = {0.5, 0.7, 0.9};
    r.finalize();
    CHECK(std::abs(r.mean_psnr - 27.0) <= 1e-9);
    CHECK(std::abs(r.mean_ssim - 0.7) <= 1e-9);
  }

  TEST_CASE("infinite psnr serializes as null with a flag") {
    EvalReport r;
    r.psnr = {std::numeric_limits<double>::infinity(), 25.0};
    r.ssim = {1.0, 0.8};
    r.rays_used = 1234;
    r.finalize();
    const auto j = r.to_json();
    CHECK(j["views"][0]["psnr"].is_null());
    CHECK(j["views"][0]["psnr_infinite"] == true);
    CHECK(j["views"][1]["psnr"] == 25.0);
    CHECK(j["mean_psnr_infinite"] == true);
    CHECK(j["train_seconds"].is_null());
    CHECK(j["mean_lpips"].is_null());
    const EvalReport back = EvalReport::from_json(nlohmann::json::parse(j.dump()));
    CHECK(std::isinf(back.psnr[0]));
    CHECK(back.psnr[1] == 25.0);
    CHECK(back.rays_used == 1234);
    CHECK_FALSE(back.train_seconds.has_value());
    CHECK_THROWS_AS(EvalReport::from_json(nlohmann::json{{"views", 3}}), ValidationError);
  }

  TEST_CASE("an empty holdout is rejected") {
    Rng rng(66);
    CHECK_THROWS_AS(evaluate(testsupport::random_field(4, rng), SceneSet{}), ValidationError);
  }

  TEST_CASE("a converged constant scene scores above 40 dB") {
    SceneSet scene;
    for (const Eigen::Vector3d eye : {Eigen::Vector3d(2.5, 0.3, 0.7), Eigen::Vector3d(-0.4, 2.5, 0.6)}) {
      scene.views.push_back(testsupport::looking_at_origin(eye, 12, 12, 0.4, 1.0, 4.5));
      ImageBuffer img(12, 12, 0.0);
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) img.set_pixel(x, y, Eigen::Vector3d(0.7, 0.25, 0.5));
      scene.images.push_back(img);
    }
    TrainConfig cfg;
    cfg.resolution = Eigen::Vector3i::Constant(6);
    cfg.batch_rays = 288;
    cfg.coarse_epochs = 200;
    cfg.fine_epochs = 0;
    cfg.samples_per_ray = 32;
    const TrainResult r = train(scene, cfg);
    RenderOptions opts;
    opts.samples_per_ray = 32;
    const EvalReport report = evaluate(r.field, scene, opts);
    CHECK(report.psnr.size() == 2);
    CHECK(report.mean_psnr >= 40.0);
    CHECK(report.mean_ssim > 0.9);
  }
}
