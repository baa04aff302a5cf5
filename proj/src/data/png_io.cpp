#include "zseg/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

namespace zseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw DataError(std::string("cannot open ") + path.string() +
                    (mode[0] == 'r' ? " for reading" : " for writing"));
  }
  return f;
}

// Decoded rows of a PNG after libpng's bit-depth normalization.
struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint8_t> bytes;
  std::size_t row_bytes = 0;
};

Decoded decode(const std::filesystem::path& path, bool want_rgb) {
  FilePtr file = open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw DataError(path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw DataError("libpng: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng: cannot allocate info");
  }
  // Everything with a destructor lives outside the longjmp range.
  Decoded out;
  std::vector<png_bytep> rows;
  volatile bool bad_type = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": corrupt or truncated PNG");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (want_rgb) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (depth < 8) png_set_expand(png);
  } else {
    if (color != PNG_COLOR_TYPE_GRAY) bad_type = true;
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_swap(png);  // little-endian uint16 in memory
  }
  if (!bad_type) {
    png_read_update_info(png, info);
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    out.row_bytes = png_get_rowbytes(png, info);
    out.bytes.resize(out.row_bytes * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + out.row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_type) throw DataError(path.string() + ": expected a grayscale PNG without alpha");
  return out;
}

void encode(const std::filesystem::path& path, int height, int width, int color_type, int depth,
            const std::vector<std::uint8_t>& bytes, std::size_t row_bytes) {
  if (height <= 0 || width <= 0) throw DataError("cannot write empty PNG " + path.string());
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw DataError("libpng: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng: cannot allocate info");
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + row_bytes * y);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng: failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw DataError("failed flushing " + path.string());
}

}  // namespace

Grid<std::uint16_t> read_png_gray(const std::filesystem::path& path) {
  const Decoded d = decode(path, false);
  Grid<std::uint16_t> out(d.height, d.width);
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t* row = d.bytes.data() + d.row_bytes * y;
    for (int x = 0; x < d.width; ++x) {
      out.at(y, x) = d.bit_depth == 16
                         ? static_cast<std::uint16_t>(row[2 * x] | (row[2 * x + 1] << 8))
                         : row[x];
    }
  }
  return out;
}

void write_png_gray16(const std::filesystem::path& path, const Grid<std::uint16_t>& image) {
  std::vector<std::uint8_t> bytes(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(image[i] & 0xff);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(image[i] >> 8);
  }
  encode(path, image.height(), image.width(), PNG_COLOR_TYPE_GRAY, 16, bytes,
         static_cast<std::size_t>(image.width()) * 2);
}

void write_png_mask(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  encode(path, mask.height(), mask.width(), PNG_COLOR_TYPE_GRAY, 8, bytes,
         static_cast<std::size_t>(mask.width()));
}

Mask read_png_mask(const std::filesystem::path& path) {
  const Grid<std::uint16_t> raw = read_png_gray(path);
  Mask out(raw.height(), raw.width());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] != 0 ? 1 : 0;
  return out;
}

void write_png_rgb(const std::filesystem::path& path, const Grid<Rgb>& image) {
  std::vector<std::uint8_t> bytes(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    for (int c = 0; c < 3; ++c) bytes[3 * i + c] = image[i][c];
  }
  encode(path, image.height(), image.width(), PNG_COLOR_TYPE_RGB, 8, bytes,
         static_cast<std::size_t>(image.width()) * 3);
}

Grid<Rgb> read_png_rgb(const std::filesystem::path& path) {
  const Decoded d = decode(path, true);
  Grid<Rgb> out(d.height, d.width);
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t* row = d.bytes.data() + d.row_bytes * y;
    for (int x = 0; x < d.width; ++x) out.at(y, x) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
  }
  return out;
}

}  // namespace zseg
