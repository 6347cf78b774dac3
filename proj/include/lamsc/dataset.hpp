// SPDX-License-Identifier: Apache-2.0
//
// VOC-2012-style dataset layout:
//
//   <root>/JPEGImages/<stem>.{jpg,jpeg,png,ppm,pgm}
//   <root>/SegmentationObject/<stem>.png   instance indices, 0 = background, 255 = void
//   <root>/SegmentationClass/<stem>.png    class indices (VOC palette order)
//
// Images are discovered by stem in sorted order and resized on load.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lamsc/image.hpp"

namespace lamsc::data {

const std::vector<std::string>& voc_classes();
std::optional<int> voc_class_index(const std::string& name);

struct DatasetEntry {
  std::string stem;
  std::string image_path;
  std::string object_path;  // empty when absent
  std::string class_path;   // empty when absent
};

struct AnnotatedInstance {
  std::vector<std::uint8_t> mask;  // H*W, {0,1}
  std::string label;
};

class Dataset {
 public:
  // max_images == 0 keeps everything.
  static Dataset open(const std::string& root, int height, int width, std::size_t max_images = 0);

  const std::string& root() const noexcept { return root_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<DatasetEntry>& entries() const noexcept { return entries_; }
  const DatasetEntry* find(const std::string& stem) const;

  ImageSample load_image(std::size_t index) const;
  std::vector<ImageSample> load_all() const;

  // Instances at the dataset resolution. Throws io when no annotation exists.
  std::vector<AnnotatedInstance> load_annotation(const DatasetEntry& entry) const;

 private:
  std::string root_;
  int height_ = 0;
  int width_ = 0;
  std::vector<DatasetEntry> entries_;
};

// Writes `count` synthetic scenes (textured background plus 1-3 coloured
// objects) with instance/class annotations in the layout above. Classes in
// `interest_classes()` are drawn with red-dominant colours, the rest are
// green/blue-dominant, so colour statistics separate the two groups.
void generate_synthetic(const std::string& root, int count, int size, std::uint64_t seed);
const std::vector<std::string>& synthetic_interest_classes();
const std::vector<std::string>& synthetic_other_classes();

}  // namespace lamsc::data
