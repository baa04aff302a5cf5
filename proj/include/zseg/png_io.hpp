#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "zseg/image.hpp"

namespace zseg {

/// Grayscale PNG of 1 to 16 bits, returned as raw sample values.
/// Throws DataError on unreadable or non-grayscale files.
Grid<std::uint16_t> read_png_gray(const std::filesystem::path& path);

void write_png_gray16(const std::filesystem::path& path, const Grid<std::uint16_t>& image);
/// Writes 0/255 8-bit grayscale.
void write_png_mask(const std::filesystem::path& path, const Mask& mask);
/// Reads a mask; any nonzero sample is foreground.
Mask read_png_mask(const std::filesystem::path& path);

using Rgb = std::array<std::uint8_t, 3>;
void write_png_rgb(const std::filesystem::path& path, const Grid<Rgb>& image);
Grid<Rgb> read_png_rgb(const std::filesystem::path& path);

}  // namespace zseg
