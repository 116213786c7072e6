#include "clearfield/quadtree.hpp"

#include "clearfield/errors.hpp"

#include <algorithm>
#include <cmath>

namespace clearfield {

using nlohmann::json;

Quadtree Quadtree::init(int width, int height, int min_area) {
  if (width < 4 || height < 4) throw ValidationError("quadtree needs an image of at least 4x4");
  Quadtree tree;
  tree.width_ = width;
  tree.height_ = height;
  tree.nodes_.push_back(QuadNode{PixelRect{0, 0, width, height}});
  for (int round = 0; round < 2; ++round)
    for (int leaf : tree.leaves()) tree.split(leaf, min_area);
  return tree;
}

std::vector<int> Quadtree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
    if (nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

int Quadtree::leaf_at(int x, int y) const {
  if (nodes_.empty() || !nodes_[0].rect.contains(x, y)) throw ValidationError("pixel outside quadtree");
  int n = 0;
  while (!nodes_[n].is_leaf()) {
    int next = -1;
    for (int c : nodes_[n].children)
      if (nodes_[c].rect.contains(x, y)) next = c;
    n = next;
  }
  return n;
}

int Quadtree::depth() const {
  int d = 0;
  for (const QuadNode& n : nodes_) d = std::max(d, n.depth);
  return d;
}

bool Quadtree::split(int node, int min_area) {
  const QuadNode parent = nodes_.at(node);
  const PixelRect& r = parent.rect;
  if (!parent.is_leaf() || r.area() <= min_area || r.x1 - r.x0 < 2 || r.y1 - r.y0 < 2) return false;
  const int xm = r.x0 + (r.x1 - r.x0) / 2;
  const int ym = r.y0 + (r.y1 - r.y0) / 2;
  const PixelRect quads[4] = {
      {r.x0, r.y0, xm, ym},  // top-left
      {r.x0, ym, xm, r.y1},  // bottom-left
      {xm, r.y0, r.x1, ym},  // top-right
      {xm, ym, r.x1, r.y1},  // bottom-right
  };
  for (int q = 0; q < 4; ++q) {
    QuadNode child;
    child.rect = quads[q];
    child.depth = parent.depth + 1;
    child.last_mean = parent.last_mean;
    nodes_[node].children[q] = static_cast<int>(nodes_.size());
    nodes_.push_back(child);
  }
  return true;
}

void Quadtree::record_loss(int x, int y, double loss) {
  QuadNode& leaf = nodes_[leaf_at(x, y)];
  leaf.loss_sum += loss;
  leaf.loss_count += 1;
}

SubdivisionReport Quadtree::subdivide_pass(double s_divide, int min_area) {
  SubdivisionReport report;
  for (int leaf : leaves()) {
    QuadNode& n = nodes_[leaf];
    if (n.loss_count == 0) {
      n.last_mean.reset();
      continue;
    }
    const double mean = n.loss_sum / static_cast<double>(n.loss_count);
    n.last_mean = mean;
    if (mean > s_divide && split(leaf, min_area)) report.split.push_back(nodes_[leaf].rect);
  }
  for (QuadNode& n : nodes_) {
    n.loss_sum = 0.0;
    n.loss_count = 0;
  }
  return report;
}

namespace {

json node_to_json(const std::vector<QuadNode>& nodes, int i) {
  const QuadNode& n = nodes[i];
  json j{{"rect", {n.rect.x0, n.rect.y0, n.rect.x1, n.rect.y1}},
         {"loss_sum", n.loss_sum},
         {"loss_count", n.loss_count},
         {"last_mean", n.last_mean ? json(*n.last_mean) : json(nullptr)}};
  if (!n.is_leaf()) {
    json children = json::array();
    for (int c : n.children) children.push_back(node_to_json(nodes, c));
    j["children"] = children;
  }
  return j;
}

void node_from_json(const json& j, int depth, std::vector<QuadNode>& nodes) {
  const int index = static_cast<int>(nodes.size());
  QuadNode n;
  const auto& r = j.at("rect");
  n.rect = {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()};
  n.depth = depth;
  n.loss_sum = j.at("loss_sum").get<double>();
  n.loss_count = j.at("loss_count").get<std::int64_t>();
  if (!j.at("last_mean").is_null()) n.last_mean = j.at("last_mean").get<double>();
  nodes.push_back(n);
  if (j.contains("children")) {
    const auto& children = j.at("children");
    if (children.size() != 4) throw ValidationError("quadtree node must have 0 or 4 children");
    for (int c = 0; c < 4; ++c) {
      nodes[index].children[c] = static_cast<int>(nodes.size());
      node_from_json(children[c], depth + 1, nodes);
    }
  }
}

}  // namespace

json Quadtree::to_json() const {
  return {{"width", width_}, {"height", height_}, {"root", node_to_json(nodes_, 0)}};
}

Quadtree Quadtree::from_json(const json& j) {
  Quadtree tree;
  try {
    tree.width_ = j.at("width").get<int>();
    tree.height_ = j.at("height").get<int>();
    node_from_json(j.at("root"), 0, tree.nodes_);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed quadtree state: ") + e.what());
  }
  long long area = 0;
  for (int leaf : tree.leaves()) area += tree.nodes_[leaf].rect.area();
  if (area != static_cast<long long>(tree.width_) * tree.height_)
    throw ValidationError("quadtree leaves do not tile the image");
  return tree;
}

double pixel_importance(const ImageBuffer& img, int i, int j) {
  double values[9];
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = std::clamp(i + dx, 0, img.width() - 1);
      const int y = std::clamp(j + dy, 0, img.height() - 1);
      values[n++] = (img(x, y, 0) + img(x, y, 1) + img(x, y, 2)) / 3.0;
    }
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= 9.0;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / 9.0);
}

std::vector<double> importance_map(const ImageBuffer& img) {
  std::vector<double> g(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) g[static_cast<std::size_t>(y) * img.width() + x] = pixel_importance(img, x, y);
  return g;
}

std::vector<double> leaf_probabilities(const Quadtree& tree, std::span<const double> importance) {
  const int w = tree.width();
  if (importance.size() != static_cast<std::size_t>(w) * tree.height())
    throw ValidationError("importance map does not match the quadtree");
  std::vector<double> p(importance.size(), 1.0);
  for (int leaf : tree.leaves()) {
    const PixelRect& r = tree.node(leaf).rect;
    double peak = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) peak = std::max(peak, importance[static_cast<std::size_t>(y) * w + x]);
    if (peak <= 0.0) continue;  // flat leaf stays uniform
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        p[i] = importance[i] / peak;
      }
  }
  return p;
}

std::vector<double> leaf_probabilities(const Quadtree& tree, const ImageBuffer& img) {
  if (img.width() != tree.width() || img.height() != tree.height())
    throw ValidationError("image does not match the quadtree");
  return leaf_probabilities(tree, importance_map(img));
}

std::int64_t leaf_budget(const QuadNode& leaf, const QuadtreeSettings& settings) {
  const bool well_learned = leaf.last_mean && *leaf.last_mean < settings.s_sample;
  const double density = well_learned ? settings.alpha * settings.mu : settings.mu;
  const auto n = static_cast<std::int64_t>(std::floor(density * static_cast<double>(leaf.rect.area()) + 0.5));
  return std::min<std::int64_t>(n, leaf.rect.area());
}

EpochPlan plan_epoch(std::span<const Quadtree> trees, std::span<const std::vector<double>> probabilities,
                     const QuadtreeSettings& settings, Rng& rng, int rays_per_pixel) {
  if (!(settings.mu > 0.0)) throw ValidationError("sampling density mu must be positive");
  if (!(settings.alpha > 0.0 && settings.alpha <= 1.0)) throw ValidationError("alpha must be in (0, 1]");
  if (!(settings.uniform_fraction >= 0.0 && settings.uniform_fraction < 1.0))
    throw ValidationError("uniform fraction must be in [0, 1)");
  if (trees.size() != probabilities.size()) throw ValidationError("one probability map per tree required");

  EpochPlan plan;
  struct Candidate {
    double key;
    int x;
    int y;
  };
  std::vector<Candidate> candidates;
  for (std::size_t v = 0; v < trees.size(); ++v) {
    const Quadtree& tree = trees[v];
    const std::vector<double>& prob = probabilities[v];
    for (int leaf : tree.leaves()) {
      const QuadNode& node = tree.node(leaf);
      const PixelRect& r = node.rect;
      candidates.clear();
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
          const double p = prob[static_cast<std::size_t>(y) * tree.width() + x];
          if (p <= 0.0) continue;
          // Efraimidis-Spirakis key: the n largest keys are a weighted
          // sample without replacement.
          double u = rng.uniform();
          while (u <= 0.0) u = rng.uniform();
          candidates.push_back({std::log(u) / p, x, y});
        }
      }
      const auto n = static_cast<std::size_t>(
          std::min<std::int64_t>(leaf_budget(node, settings), static_cast<std::int64_t>(candidates.size())));
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(),
                        [](const Candidate& a, const Candidate& b) {
                          if (a.key != b.key) return a.key > b.key;
                          return a.y != b.y ? a.y < b.y : a.x < b.x;
                        });
      for (std::size_t i = 0; i < n; ++i)
        plan.pixels.push_back({static_cast<int>(v), candidates[i].x, candidates[i].y});
    }
  }

  const double f = settings.uniform_fraction;
  const auto uniform = static_cast<std::int64_t>(
      std::floor(static_cast<double>(plan.pixels.size()) * f / (1.0 - f) + 0.5));
  for (std::int64_t i = 0; i < uniform && !trees.empty(); ++i) {
    const int v = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(trees.size()) - 1));
    plan.uniform_pixels.push_back({v, static_cast<int>(rng.uniform_int(0, trees[v].width() - 1)),
                                   static_cast<int>(rng.uniform_int(0, trees[v].height() - 1))});
  }
  plan.rays_budgeted = static_cast<std::int64_t>(plan.total()) * rays_per_pixel;
  return plan;
}

ImageBuffer render_tree_overlay(const Quadtree& tree, const ImageBuffer& img, const Eigen::Vector3d& color) {
  if (img.width() != tree.width() || img.height() != tree.height())
    throw ValidationError("image does not match the quadtree");
  ImageBuffer out = img;
  for (int leaf : tree.leaves()) {
    const PixelRect& r = tree.node(leaf).rect;
    if (r.x0 > 0)
      for (int y = r.y0; y < r.y1; ++y) out.set_pixel(r.x0, y, color);
    if (r.y0 > 0)
      for (int x = r.x0; x < r.x1; ++x) out.set_pixel(x, r.y0, color);
  }
  return out;
}

}  // namespace clearfield
