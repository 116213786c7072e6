#include "clearfield/image.hpp"

#include "clearfield/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

namespace clearfield {

ImageBuffer::ImageBuffer(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ValidationError("image dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(width) * height * 3, fill);
}

ImageBuffer& ImageBuffer::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  return *this;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw IoError(std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

void save_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "'");
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(),
                 [](double v) { return static_cast<unsigned char>(quantize_channel(v, 8)); });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw ValidationError("'" + path.string() + "' is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (bit_depth != 8 && bit_depth != 16) {
    throw ValidationError("unsupported bit depth " + std::to_string(bit_depth) + " in '" +
                          path.string() + "'");
  }
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian uint16
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (png_get_channels(png, info) != 3) throw ValidationError("unsupported channel layout");

  std::vector<png_byte> pixels(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + rowbytes * y;
  png_read_image(png, rows.data());

  ImageBuffer img(width, height);
  auto out = img.data();
  if (depth == 8) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i] / 255.0;
  } else {
    const auto* words = reinterpret_cast<const std::uint16_t*>(pixels.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = words[i] / 65535.0;
  }
  return img;
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path, int bits) {
  if (bits != 8 && bits != 16) throw ValidationError("unsupported bit depth " + std::to_string(bits));
  if (path.extension() == ".ppm") {
    save_ppm(img, path);
    return;
  }
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width(), img.height(), bits, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t row_values = static_cast<std::size_t>(img.width()) * 3;
  std::vector<png_byte> row(row_values * (bits / 8));
  const auto data = img.data();
  for (int y = 0; y < img.height(); ++y) {
    for (std::size_t i = 0; i < row_values; ++i) {
      const unsigned code = quantize_channel(data[y * row_values + i], bits);
      if (bits == 8) {
        row[i] = static_cast<png_byte>(code);
      } else {
        row[2 * i] = static_cast<png_byte>(code >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<png_byte>(code & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace clearfield
