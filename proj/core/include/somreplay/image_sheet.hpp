#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "somreplay/dataset.hpp"
#include "somreplay/image_shape.hpp"
#include "somreplay/linalg.hpp"

namespace somreplay {

/// rows x cols grid of equally shaped images, each stored planar (CHW).
struct ImageSheet {
  int rows = 0;
  int cols = 0;
  ImageShape cell;
  ValueRange range = kUnitRange;
  std::vector<std::vector<double>> cells;  // row-major, rows*cols entries
  std::string caption;

  ImageSheet() = default;
  ImageSheet(int rows, int cols, ImageShape cell, ValueRange range);

  std::vector<double>& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  const std::vector<double>& at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * cols + c];
  }
};

enum class ImageFormat { pgm, ppm, png };

/// 8-bit raster of a sheet: height x width x channels, interleaved.
struct Raster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<std::uint8_t> pixels;
  bool operator==(const Raster&) const = default;
};

/// Quantizes to 8 bits: round(255 * (v - lo) / (hi - lo)). Values outside the
/// range are clamped and counted in `clamped`.
Raster rasterize(const ImageSheet& sheet, std::size_t* clamped = nullptr);

/// PGM (P5) for single-channel sheets, PPM (P6) for three channels; maxval 255,
/// header "P5\n<w> <h>\n255\n". PNG (8-bit gray or RGB, zlib) for either.
void write_image_sheet(const ImageSheet& sheet, const std::filesystem::path& path, ImageFormat format);

std::vector<std::uint8_t> encode_pnm(const Raster& raster);
std::vector<std::uint8_t> encode_png(const Raster& raster);

/// Parses binary P5/P6 files with maxval 255.
Raster read_pnm(const std::filesystem::path& path);
Raster decode_pnm(std::span<const std::uint8_t> bytes);

/// Format from extension (.pgm/.ppm/.png) or throws ConfigError.
ImageFormat image_format_for(const std::filesystem::path& path);

}  // namespace somreplay
