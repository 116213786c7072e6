#include "support.hpp"

#include "clearfield/errors.hpp"
#include "clearfield/quadtree.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace clearfield;

namespace {

// every pixel covered by exactly one leaf
bool tiles_exactly(const Quadtree& t) {
  std::vector<int> cover(static_cast<std::size_t>(t.width()) * t.height(), 0);
  long long area = 0;
  for (int leaf : t.leaves()) {
    const PixelRect& r = t.node(leaf).rect;
    area += r.area();
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) ++cover[static_cast<std::size_t>(y) * t.width() + x];
  }
  if (area != static_cast<long long>(t.width()) * t.height()) return false;
  for (int c : cover)
    if (c != 1) return false;
  return true;
}

void mark_learned(Quadtree& t, double loss) {
  for (int leaf : t.leaves()) {
    const PixelRect& r = t.node(leaf).rect;
    t.record_loss(r.x0, r.y0, loss);
  }
  t.subdivide_pass(1.0, 625);
}

ImageBuffer half_noise(int w, int h, Rng& rng) {
  ImageBuffer img(w, h, 0.4);
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x) img.set_pixel(x, y, Eigen::Vector3d::Constant(rng.uniform()));
  return img;
}

}  // namespace

TEST_SUITE("quadtree structure") {
  TEST_CASE("an 800 square image starts with 16 leaves of 200 square") {
    const Quadtree t = Quadtree::init(800, 800);
    const auto leaves = t.leaves();
    CHECK(leaves.size() == 16);
    for (int leaf : leaves) {
      CHECK(t.node(leaf).rect.area() == 40000);
      CHECK(t.node(leaf).depth == 2);
    }
    CHECK(tiles_exactly(t));
  }

  TEST_CASE("odd sizes still tile") {
    for (auto [w, h] : {std::pair{801, 801}, std::pair{129, 67}, std::pair{5, 4}}) {
      const Quadtree t = Quadtree::init(w, h, 0);
      CHECK(t.leaves().size() == 16);
      CHECK(tiles_exactly(t));
    }
    CHECK_THROWS_AS(Quadtree::init(3, 10), ValidationError);
  }

  TEST_CASE("the area floor limits initial splits") {
    const Quadtree t = Quadtree::init(50, 50);  // 25x25 children have area 625
    CHECK(t.leaves().size() == 4);
  }

  TEST_CASE("random subdivisions preserve tiling and bound depth") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      Quadtree t = Quadtree::init(97 + trial, 64 + 3 * trial, 0);
      for (int step = 0; step < 60; ++step) {
        const auto leaves = t.leaves();
        const int leaf = leaves[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(leaves.size()) - 1))];
        const long long before = t.node(leaf).rect.area();
        if (t.split(leaf, 0))
          for (int c : t.node(leaf).children) CHECK(t.node(c).rect.area() <= before);
      }
      CHECK(tiles_exactly(t));
      CHECK(t.depth() <= std::log2(std::min(t.width(), t.height())) + 1);
    }
  }

  TEST_CASE("subdivision follows the loss threshold and the area floor") {
    Quadtree t = Quadtree::init(800, 800);
    const int target = t.leaf_at(250, 450);
    t.record_loss(250, 450, 0.04);
    t.record_loss(260, 460, 0.06);
    t.record_loss(10, 10, 0.02);  // equal to the threshold: stays
    const SubdivisionReport report = t.subdivide_pass(0.02, 625);
    REQUIRE(report.split.size() == 1);
    CHECK(report.split[0] == PixelRect{200, 400, 400, 600});
    CHECK(t.leaves().size() == 19);
    for (int c : t.node(target).children) {
      CHECK(t.node(c).rect.area() == 10000);
      CHECK(*t.node(c).last_mean == doctest::Approx(0.05));
    }
    CHECK(tiles_exactly(t));
    for (const QuadNode& n : t.nodes()) CHECK(n.loss_count == 0);

    Quadtree small = Quadtree::init(100, 100, 0);  // 25x25 leaves
    small.record_loss(0, 0, 100.0);
    CHECK(small.subdivide_pass(0.02, 625).split.empty());

    Quadtree quiet = Quadtree::init(64, 64, 0);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) quiet.record_loss(x, y, 0.01);
    CHECK(quiet.subdivide_pass(0.02, 0).split.empty());
  }

  TEST_CASE("loss records route to leaves") {
    Quadtree t = Quadtree::init(120, 80, 0);
    for (const QuadNode& n : t.nodes()) CHECK(n.loss_count == 0);
    t.record_loss(1, 1, 0.1);
    t.record_loss(2, 3, 0.3);
    const QuadNode& n = t.node(t.leaf_at(0, 0));
    CHECK(n.loss_count == 2);
    CHECK(n.loss_sum / n.loss_count == doctest::Approx(0.2));

    Rng rng(42);
    Quadtree r = Quadtree::init(120, 80, 0);
    std::map<std::tuple<int, int, int, int>, std::pair<double, int>> oracle;
    for (int i = 0; i < 1000; ++i) {
      const int x = static_cast<int>(rng.uniform_int(0, 119)), y = static_cast<int>(rng.uniform_int(0, 79));
      const double loss = rng.uniform();
      r.record_loss(x, y, loss);
      // leaves of a fresh tree are a regular 4x4 grid
      const int cx = x / 30, cy = y / 20;
      auto& slot = oracle[{cx * 30, cy * 20, cx * 30 + 30, cy * 20 + 20}];
      slot.first += loss;
      slot.second += 1;
    }
    for (int leaf : r.leaves()) {
      const QuadNode& q = r.node(leaf);
      const auto& slot = oracle[{q.rect.x0, q.rect.y0, q.rect.x1, q.rect.y1}];
      CHECK(q.loss_count == slot.second);
      CHECK(std::abs(q.loss_sum / q.loss_count - slot.first / slot.second) <= 1e-12);
    }
  }

  TEST_CASE("state round-trips through JSON") {
    Quadtree t = Quadtree::init(90, 70, 0);
    t.record_loss(5, 5, 0.5);
    t.subdivide_pass(0.02, 0);
    t.record_loss(80, 60, 0.25);
    const Quadtree back = Quadtree::from_json(t.to_json());
    CHECK(back.to_json() == t.to_json());
    CHECK(back.leaves().size() == t.leaves().size());
    CHECK(*back.node(back.leaf_at(1, 1)).last_mean == 0.5);

    auto broken = t.to_json();
    broken["width"] = 91;
    CHECK_THROWS_AS(Quadtree::from_json(broken), ValidationError);
    CHECK_THROWS_AS(Quadtree::from_json(nlohmann::json{{"width", 4}}), ValidationError);
  }
}

TEST_SUITE("importance") {
  TEST_CASE("five ones and four zeros") {
    ImageBuffer img(3, 3, 0.0);
    for (auto [x, y] : {std::pair{0, 0}, {2, 0}, {1, 1}, {0, 2}, {2, 2}}) img.set_pixel(x, y, Eigen::Vector3d::Ones());
    CHECK(std::abs(pixel_importance(img, 1, 1) - std::sqrt(20.0 / 81.0)) <= 1e-12);
  }

  TEST_CASE("constant images and constant shifts") {
    const ImageBuffer flat(7, 5, 0.3);
    for (double g : importance_map(flat)) CHECK(g == doctest::Approx(0.0));
    Rng rng(43);
    ImageBuffer img = testsupport::random_image(9, 9, rng);
    ImageBuffer shifted = img;
    for (double& v : shifted.data()) v += 0.37;
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) CHECK(std::abs(pixel_importance(img, x, y) - pixel_importance(shifted, x, y)) <= 1e-12);
  }

  TEST_CASE("border pixels clamp the neighbourhood") {
    ImageBuffer img(4, 4, 0.0);
    img.set_pixel(0, 0, Eigen::Vector3d::Ones());
    // the clamped 3x3 window at the corner repeats (0,0) four times
    const double mean = 4.0 / 9.0;
    const double var = (4 * (1 - mean) * (1 - mean) + 5 * mean * mean) / 9.0;
    CHECK(std::abs(pixel_importance(img, 0, 0) - std::sqrt(var)) <= 1e-12);
  }

  TEST_CASE("leaf probabilities") {
    Rng rng(44);
    const Quadtree t = Quadtree::init(40, 40, 0);
    ImageBuffer img = testsupport::random_image(40, 40, rng);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) img.set_pixel(x, y, Eigen::Vector3d::Constant(0.5));
    const auto g = importance_map(img);
    const auto p = leaf_probabilities(t, img);
    for (int leaf : t.leaves()) {
      const PixelRect& r = t.node(leaf).rect;
      double peak = 0.0, pmax = 0.0;
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) peak = std::max(peak, g[y * 40 + x]);
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) {
          const double expected = peak > 0 ? g[y * 40 + x] / peak : 1.0;
          CHECK(p[y * 40 + x] == expected);
          pmax = std::max(pmax, p[y * 40 + x]);
        }
      CHECK(pmax == 1.0);
    }
    // the top-left leaf's interior is constant, but its border sees noise
    CHECK(p[5 * 40 + 5] < 1.0);
    const auto flat = leaf_probabilities(t, ImageBuffer(40, 40, 0.2));
    for (double v : flat) CHECK(v == 1.0);
    CHECK_THROWS_AS(leaf_probabilities(t, ImageBuffer(41, 40)), ValidationError);
  }
}

TEST_SUITE("plan_epoch") {
  TEST_CASE("well-learned leaves get alpha times the budget") {
    Rng rng(45);
    std::vector<Quadtree> trees{Quadtree::init(120, 80, 0), Quadtree::init(120, 80, 0)};
    for (auto& t : trees) mark_learned(t, 0.001);
    std::vector<std::vector<double>> probs;
    for (const auto& t : trees) probs.push_back(leaf_probabilities(t, testsupport::random_image(120, 80, rng)));
    const QuadtreeSettings settings;
    Rng plan_rng(1);
    const EpochPlan plan = plan_epoch(trees, probs, settings, plan_rng);
    // 0.1 * 600 = 60 per leaf, 32 leaves
    CHECK(plan.pixels.size() == 32 * 60);
    CHECK(std::abs(static_cast<double>(plan.pixels.size()) - 0.1 * 2 * 9600) <= 32);
    const double top_up = 0.2 * static_cast<double>(plan.total());
    CHECK(std::abs(static_cast<double>(plan.uniform_pixels.size()) - top_up) <= 1.0);
    CHECK(plan.rays_budgeted == static_cast<std::int64_t>(plan.total()));
  }

  TEST_CASE("leaf budgets") {
    QuadNode leaf;
    leaf.rect = {0, 0, 25, 25};
    QuadtreeSettings s;
    CHECK(leaf_budget(leaf, s) == 625);
    leaf.last_mean = 0.005;
    CHECK(leaf_budget(leaf, s) == 63);  // 62.5 rounds up
    leaf.last_mean = 0.01;
    CHECK(leaf_budget(leaf, s) == 625);
    s.mu = 3.0;
    CHECK(leaf_budget(leaf, s) == 625);
  }

  TEST_CASE("alpha one ignores loss history") {
    Rng rng(46);
    Quadtree fresh = Quadtree::init(64, 64, 0), learned = fresh;
    mark_learned(learned, 0.0001);
    const auto p = leaf_probabilities(fresh, testsupport::random_image(64, 64, rng));
    QuadtreeSettings s;
    s.alpha = 1.0;
    s.mu = 0.5;
    Rng a(7), b(7);
    const std::vector<Quadtree> t1{fresh}, t2{learned};
    const std::vector<std::vector<double>> probs{p};
    CHECK(plan_epoch(t1, probs, s, a).pixels == plan_epoch(t2, probs, s, b).pixels);
  }

  TEST_CASE("the noisy half of a learned-flat image draws most samples") {
    Rng rng(47);
    const ImageBuffer img = half_noise(64, 64, rng);
    Quadtree t = Quadtree::init(64, 64);
    for (int leaf : t.leaves()) {
      const PixelRect& r = t.node(leaf).rect;
      t.record_loss(r.x0, r.y0, r.x0 < 32 ? 0.001 : 0.015);
    }
    CHECK(t.subdivide_pass().split.empty());
    const std::vector<Quadtree> trees{t};
    const std::vector<std::vector<double>> probs{leaf_probabilities(t, img)};
    double left = 0, right = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Rng plan_rng = Rng::stream(48, "plan", trial);
      for (const PlannedPixel& px : plan_epoch(trees, probs, QuadtreeSettings{}, plan_rng).pixels)
        (px.x < 32 ? left : right) += 1;
    }
    CHECK(right >= 3 * left);
  }

  TEST_CASE("importance steers draws within a leaf") {
    ImageBuffer img(40, 40, 0.0);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if ((x + y) % 2 == 0 && x >= 30 && y >= 30) img.set_pixel(x, y, Eigen::Vector3d::Ones());
    const Quadtree t = Quadtree::init(40, 40, 0);
    const std::vector<Quadtree> trees{t};
    const std::vector<std::vector<double>> probs{leaf_probabilities(t, img)};
    QuadtreeSettings s;
    s.mu = 0.2;
    int zero_prob_hits = 0;
    const auto& p = probs[0];
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng = Rng::stream(49, "plan", trial);
      for (const PlannedPixel& px : plan_epoch(trees, probs, s, rng).pixels) zero_prob_hits += p[px.y * 40 + px.x] == 0.0;
    }
    CHECK(zero_prob_hits == 0);
  }

  TEST_CASE("plans stay within budget and are reproducible") {
    Rng rng(50);
    std::vector<Quadtree> trees;
    std::vector<std::vector<double>> probs;
    for (int v = 0; v < 3; ++v) {
      trees.push_back(Quadtree::init(48, 40, 0));
      probs.push_back(leaf_probabilities(trees.back(), half_noise(48, 40, rng)));
    }
    for (double mu : {0.3, 1.0, 2.0}) {
      QuadtreeSettings s;
      s.mu = mu;
      Rng a(9), b(9);
      const EpochPlan p1 = plan_epoch(trees, probs, s, a, 4), p2 = plan_epoch(trees, probs, s, b, 4);
      CHECK(p1.pixels == p2.pixels);
      CHECK(p1.uniform_pixels == p2.uniform_pixels);
      CHECK(static_cast<double>(p1.pixels.size()) <= std::min(mu, 1.0) * 48 * 40 * 3 + 1e-9);
      CHECK(std::abs(static_cast<double>(p1.uniform_pixels.size()) - 0.2 * p1.total()) <= 1.0);
      CHECK(p1.rays_budgeted == 4 * static_cast<std::int64_t>(p1.total()));
      for (const PlannedPixel& px : p1.uniform_pixels) {
        CHECK(px.view < 3);
        CHECK(px.x < 48);
        CHECK(px.y < 40);
      }
    }
    QuadtreeSettings bad;
    bad.alpha = 0.0;
    Rng r(1);
    CHECK_THROWS_AS(plan_epoch(trees, probs, bad, r), ValidationError);
  }
}

TEST_SUITE("overlay") {
  TEST_CASE("a fresh tree draws three lines each way") {
    const Eigen::Vector3d magenta(1, 0, 1);
    const Quadtree t = Quadtree::init(40, 28, 0);
    const ImageBuffer out = render_tree_overlay(t, ImageBuffer(40, 28, 0.0), magenta);
    CHECK(out.width() == 40);
    CHECK(out.height() == 28);
    int drawn = 0;
    std::set<int> columns, rows;
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 40; ++x)
        if (out.pixel(x, y) == magenta) ++drawn;
    for (int x = 0; x < 40; ++x)
      if (out.pixel(x, 3) == magenta) columns.insert(x);
    for (int y = 0; y < 28; ++y)
      if (out.pixel(3, y) == magenta) rows.insert(y);
    CHECK(columns == std::set<int>{10, 20, 30});
    CHECK(rows == std::set<int>{7, 14, 21});
    CHECK(drawn == 3 * 28 + 3 * 40 - 9);
  }

  TEST_CASE("drawn pixels match interior edge lengths after splits") {
    Quadtree t = Quadtree::init(64, 48, 0);
    t.split(t.leaf_at(20, 15), 0);
    t.split(t.leaf_at(50, 40), 0);
    const ImageBuffer out = render_tree_overlay(t, ImageBuffer(64, 48, 0.0));
    // oracle: mark the left and top edge of every leaf that is not on the image border
    std::vector<char> mask(64 * 48, 0);
    for (int leaf : t.leaves()) {
      const PixelRect& r = t.node(leaf).rect;
      for (int y = r.y0; y < r.y1 && r.x0 > 0; ++y) mask[y * 64 + r.x0] = 1;
      for (int x = r.x0; x < r.x1 && r.y0 > 0; ++x) mask[r.y0 * 64 + x] = 1;
    }
    int expected = 0, drawn = 0;
    for (char m : mask) expected += m;
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x) drawn += out.pixel(x, y) != Eigen::Vector3d::Zero();
    CHECK(drawn == expected);
    CHECK(expected > 3 * 48 + 3 * 64 - 9);
  }
}
