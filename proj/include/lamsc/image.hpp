// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lamsc/tensor.hpp"

namespace lamsc {

inline constexpr int kMinImageSide = 8;

// H x W x C pixels in [0,1].
struct ImageSample {
  Tensor pixels;
  std::string source_id;

  int height() const { return pixels.dim(0); }
  int width() const { return pixels.dim(1); }
  int channels() const { return pixels.dim(2); }
};

ImageSample make_image(int height, int width, int channels, std::string source_id = {}, double fill = 0.0);

// Throws precondition/shape errors when the ImageSample invariants do not hold.
void validate_image(const ImageSample& image);

// Clamps every pixel into [0,1].
void clip_unit(Tensor& t);

// 8-bit label map (annotation bitmap).
struct IndexMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

namespace io {

// PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette), JPEG, PPM/PGM (P5/P6).
// Alpha is dropped; grayscale stays single-channel.
ImageSample load_image(const std::string& path);
void save_png(const std::string& path, const ImageSample& image);

// Raw indices of a palette or gray 8-bit PNG (VOC annotation convention).
IndexMap load_index_map(const std::string& path);
void save_index_png(const std::string& path, const IndexMap& map);

}  // namespace io

// Area-averaged resize for images (bilinear when upsampling).
ImageSample resize_image(const ImageSample& image, int height, int width);
IndexMap resize_index_nearest(const IndexMap& map, int height, int width);

}  // namespace lamsc
