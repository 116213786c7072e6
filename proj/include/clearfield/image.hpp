#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <vector>

namespace clearfield {

/// Row-major H x W x 3 image with channel values in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double& operator()(int x, int y, int c) { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c) const { return data_[index(x, y, c)]; }

  Eigen::Vector3d pixel(int x, int y) const {
    const std::size_t i = index(x, y, 0);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, const Eigen::Vector3d& rgb) {
    const std::size_t i = index(x, y, 0);
    data_[i] = rgb.x();
    data_[i + 1] = rgb.y();
    data_[i + 2] = rgb.z();
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Eigen::Map<Eigen::ArrayXd> array() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<const Eigen::ArrayXd> array() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  /// Clamp every channel into [0, 1].
  ImageBuffer& clamp();

  bool same_shape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Reads an 8- or 16-bit PNG. Gray and palette images are expanded to RGB,
/// alpha is dropped.
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes a PNG (8 or 16 bits per channel, round-half-up quantization) or,
/// for a `.ppm` extension, an 8-bit binary P6 file.
void save_image(const ImageBuffer& img, const std::filesystem::path& path, int bits = 8);

/// Round-half-up quantization used by save_image.
inline unsigned quantize_channel(double v, int bits) {
  const double max_code = static_cast<double>((1u << bits) - 1u);
  const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<unsigned>(clamped * max_code + 0.5);
}

}  // namespace clearfield
