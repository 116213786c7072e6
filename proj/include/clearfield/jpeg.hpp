#pragma once

#include "clearfield/image.hpp"

#include <array>

namespace clearfield {

using QuantTable = std::array<int, 64>;

/// Annex K base tables, row-major (not zig-zag).
extern const QuantTable kLumaBaseTable;
extern const QuantTable kChromaBaseTable;

/// libjpeg quality scaling: scale = q < 50 ? 5000 / q : 200 - 2q,
/// entry = (base * scale + 50) / 100 clamped to [1, 255].
QuantTable scaled_quant_table(const QuantTable& base, int quality);

/// Pixel-domain effect of a baseline JPEG encode/decode at `quality`:
/// RGB -> YCbCr (JFIF), level shift, 8x8 DCT-II, quantize/dequantize,
/// inverse DCT, back to RGB, clamp. 4:4:4 sampling; partial blocks are
/// padded by edge replication.
ImageBuffer jpeg_roundtrip(const ImageBuffer& img, int quality);

}  // namespace clearfield
