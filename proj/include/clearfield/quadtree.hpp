#pragma once

#include "clearfield/image.hpp"
#include "clearfield/rng.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace clearfield {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  long long area() const { return static_cast<long long>(x1 - x0) * (y1 - y0); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct QuadNode {
  PixelRect rect;
  int depth = 0;
  /// top-left, bottom-left, top-right, bottom-right; -1 for a leaf
  std::array<int, 4> children{-1, -1, -1, -1};
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  /// Mean loss of the previous epoch, carried to the children on a split.
  std::optional<double> last_mean;

  bool is_leaf() const { return children[0] < 0; }
};

struct QuadtreeSettings {
  double mu = 1.0;              // sampling density
  double alpha = 0.1;           // density factor for well-learned leaves
  double s_sample = 0.01;       // well-learned threshold on previous mean loss
  double s_divide = 0.02;       // subdivision threshold on mean loss
  int min_area = 625;           // leaves of this area or less never split
  double uniform_fraction = 0.2;  // share of uniformly drawn pixels in a plan
};

struct SubdivisionReport {
  std::vector<PixelRect> split;
};

/// Per-view quadtree over the image plane. Nodes live in one vector; a
/// split appends four children.
class Quadtree {
 public:
  Quadtree() = default;

  /// Root over width x height, subdivided twice (16 leaves unless the
  /// min-area rule stops a split).
  static Quadtree init(int width, int height, int min_area = 625);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<QuadNode>& nodes() const { return nodes_; }
  const QuadNode& node(int i) const { return nodes_[i]; }

  std::vector<int> leaves() const;
  int leaf_at(int x, int y) const;
  int depth() const;

  /// Splits leaf `node` at the floor midpoints. Returns false when the node
  /// is not a leaf, its area is <= min_area, or a side is shorter than 2.
  bool split(int node, int min_area);

  void record_loss(int x, int y, double loss);

  /// Splits every leaf with recorded samples whose mean loss exceeds
  /// s_divide and whose area exceeds min_area. Each leaf's mean becomes its
  /// `last_mean` (inherited by new children) and all accumulators reset.
  SubdivisionReport subdivide_pass(double s_divide = 0.02, int min_area = 625);

  nlohmann::json to_json() const;
  static Quadtree from_json(const nlohmann::json& j);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<QuadNode> nodes_;
};

/// Local contrast at pixel (i, j): standard deviation of the luminance
/// (R + G + B) / 3 over the pixel and its 8 neighbours, edge-clamped.
double pixel_importance(const ImageBuffer& img, int i, int j);

/// Row-major width x height map of importance values.
std::vector<double> importance_map(const ImageBuffer& img);

/// Per pixel: importance divided by the largest importance in its leaf, or 1
/// throughout a leaf whose importances are all zero.
std::vector<double> leaf_probabilities(const Quadtree& tree, const ImageBuffer& img);
std::vector<double> leaf_probabilities(const Quadtree& tree, std::span<const double> importance);

struct PlannedPixel {
  int view = 0;
  int x = 0;
  int y = 0;
  friend bool operator==(const PlannedPixel&, const PlannedPixel&) = default;
};

struct EpochPlan {
  std::vector<PlannedPixel> pixels;          // importance-sampled
  std::vector<PlannedPixel> uniform_pixels;  // uniform top-up
  std::int64_t rays_budgeted = 0;

  std::size_t total() const { return pixels.size() + uniform_pixels.size(); }
};

/// Leaf budget: alpha * mu * area when the leaf's previous mean loss is below
/// s_sample, else mu * area (also for leaves without history); rounded half
/// up, capped at the number of pixels with non-zero probability.
std::int64_t leaf_budget(const QuadNode& leaf, const QuadtreeSettings& settings);

/// Draws each leaf's budget without replacement with probability proportional
/// to `probabilities` (equivalent to rejection sampling against them), then
/// appends round(budget * f / (1 - f)) uniform pixels over all views.
EpochPlan plan_epoch(std::span<const Quadtree> trees, std::span<const std::vector<double>> probabilities,
                     const QuadtreeSettings& settings, Rng& rng, int rays_per_pixel = 1);

/// Image with interior leaf boundaries painted in `color`.
ImageBuffer render_tree_overlay(const Quadtree& tree, const ImageBuffer& img,
                                const Eigen::Vector3d& color = Eigen::Vector3d(1.0, 0.0, 1.0));

}  // namespace clearfield
