#pragma once

#include <filesystem>
#include <vector>

#include "vsel/tensor.hpp"

namespace vsel {

/// Raster image with one H x W plane per channel; intensities in [0, 1].
struct Image {
  std::vector<Grid> planes;

  Index height() const { return planes.empty() ? 0 : planes.front().rows(); }
  Index width() const { return planes.empty() ? 0 : planes.front().cols(); }
  Index channels() const { return static_cast<Index>(planes.size()); }
  bool empty() const { return planes.empty() || height() == 0 || width() == 0; }

  static Image constant(Index height, Index width, Index channels, double value);
};

/// Reads 8-bit PNG, binary PGM (P5) or binary PPM (P6), chosen by file magic.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG (1 or 3 channels), clamping to [0, 1].
void write_png(const std::filesystem::path& path, const Image& image);

/// Writes a grid as an 8-bit grayscale PNG, mapping [0, 1] to [0, 255].
void write_png(const std::filesystem::path& path, const Grid& grid);

/// Luma conversion with Rec. 601 weights; grayscale input is returned as is.
Image to_grayscale(const Image& image);

Image resize_bilinear(const Image& image, Index rows, Index cols);

}  // namespace vsel
