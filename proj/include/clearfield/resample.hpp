#pragma once

#include "clearfield/image.hpp"

#include <string_view>

namespace clearfield {

enum class ResizeMode { area, bilinear, bicubic };

std::string_view to_string(ResizeMode mode);
ResizeMode resize_mode_from_string(std::string_view name);

/// Output side for a scale factor: round(side * scale), at least 1.
int scaled_size(int side, double scale);

/// Resample to `scale` times the input size.
ImageBuffer resize(const ImageBuffer& img, double scale, ResizeMode mode);

/// Resample to an explicit size. Sample positions use half-pixel centers.
///   area      exact box integration of the source over each target footprint
///   bilinear  tent filter, edge-clamped
///   bicubic   Keys cubic with a = -0.75, edge-clamped, result clamped to [0, 1]
ImageBuffer resize_to(const ImageBuffer& img, int width, int height, ResizeMode mode);

}  // namespace clearfield
