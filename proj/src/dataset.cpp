// SPDX-License-Identifier: Apache-2.0
#include "lamsc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "lamsc/error.hpp"
#include "lamsc/nn.hpp"

namespace fs = std::filesystem;

namespace lamsc::data {

const std::vector<std::string>& voc_classes() {
  static const std::vector<std::string> names = {
      "background", "aeroplane", "bicycle", "bird",  "boat",        "bottle", "bus",
      "car",        "cat",       "chair",   "cow",   "diningtable", "dog",    "horse",
      "motorbike",  "person",    "pottedplant", "sheep", "sofa",    "train",  "tvmonitor"};
  return names;
}

std::optional<int> voc_class_index(const std::string& name) {
  const auto& names = voc_classes();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

namespace {

const std::array<const char*, 6> kImageExts = {".jpg", ".jpeg", ".png", ".ppm", ".pgm", ".pnm"};

bool is_image_ext(std::string ext) {
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::find(kImageExts.begin(), kImageExts.end(), ext) != kImageExts.end();
}

}  // namespace

Dataset Dataset::open(const std::string& root, int height, int width, std::size_t max_images) {
  const fs::path images = fs::path(root) / "JPEGImages";
  if (!fs::is_directory(images)) fail(ErrorCode::io, "dataset has no JPEGImages directory: " + root);
  Dataset ds;
  ds.root_ = root;
  ds.height_ = height;
  ds.width_ = width;
  for (const auto& e : fs::directory_iterator(images)) {
    if (!e.is_regular_file() || !is_image_ext(e.path().extension().string())) continue;
    DatasetEntry entry;
    entry.stem = e.path().stem().string();
    entry.image_path = e.path().string();
    const fs::path obj = fs::path(root) / "SegmentationObject" / (entry.stem + ".png");
    const fs::path cls = fs::path(root) / "SegmentationClass" / (entry.stem + ".png");
    if (fs::exists(obj)) entry.object_path = obj.string();
    if (fs::exists(cls)) entry.class_path = cls.string();
    ds.entries_.push_back(std::move(entry));
  }
  std::sort(ds.entries_.begin(), ds.entries_.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.stem < b.stem; });
  if (max_images && ds.entries_.size() > max_images) ds.entries_.resize(max_images);
  if (ds.entries_.empty()) fail(ErrorCode::io, "dataset is empty: " + root);
  return ds;
}

const DatasetEntry* Dataset::find(const std::string& stem) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), stem,
                             [](const DatasetEntry& e, const std::string& s) { return e.stem < s; });
  return it != entries_.end() && it->stem == stem ? &*it : nullptr;
}

ImageSample Dataset::load_image(std::size_t index) const {
  ImageSample img = io::load_image(entries_.at(index).image_path);
  img = resize_image(img, height_, width_);
  img.source_id = entries_[index].stem;
  return img;
}

std::vector<ImageSample> Dataset::load_all() const {
  std::vector<ImageSample> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) out.push_back(load_image(i));
  return out;
}

std::vector<AnnotatedInstance> Dataset::load_annotation(const DatasetEntry& entry) const {
  if (entry.object_path.empty() && entry.class_path.empty())
    fail(ErrorCode::io, "missing annotation file for " + entry.stem + " (expected SegmentationObject/" + entry.stem +
                            ".png or SegmentationClass/" + entry.stem + ".png)");
  std::optional<IndexMap> cls;
  if (!entry.class_path.empty()) cls = resize_index_nearest(io::load_index_map(entry.class_path), height_, width_);
  const auto& names = voc_classes();
  auto class_name = [&](int idx) -> std::string {
    return idx >= 0 && idx < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(idx)] : "class" + std::to_string(idx);
  };

  // Instance map when present, otherwise one instance per class.
  const IndexMap ids = !entry.object_path.empty()
                           ? resize_index_nearest(io::load_index_map(entry.object_path), height_, width_)
                           : *cls;
  const bool per_class = entry.object_path.empty();
  std::map<int, AnnotatedInstance> by_id;
  std::map<int, std::map<int, int>> votes;
  for (std::size_t p = 0; p < ids.values.size(); ++p) {
    const int v = ids.values[p];
    if (v == 0 || v == 255) continue;
    auto& inst = by_id[v];
    if (inst.mask.empty()) inst.mask.assign(ids.values.size(), 0);
    inst.mask[p] = 1;
    if (cls && !per_class) {
      const int c = cls->values[p];
      if (c != 0 && c != 255) ++votes[v][c];
    }
  }
  std::vector<AnnotatedInstance> out;
  for (auto& [id, inst] : by_id) {
    if (per_class) {
      inst.label = class_name(id);
    } else if (!votes[id].empty()) {
      auto best = std::max_element(votes[id].begin(), votes[id].end(),
                                   [](const auto& a, const auto& b) { return a.second < b.second; });
      inst.label = class_name(best->first);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// -- synthetic scenes ----------------------------------------------------------------

const std::vector<std::string>& synthetic_interest_classes() {
  static const std::vector<std::string> c = {"person", "car"};
  return c;
}

const std::vector<std::string>& synthetic_other_classes() {
  static const std::vector<std::string> c = {"dog", "bird", "pottedplant"};
  return c;
}

namespace {

struct Rgb {
  double r, g, b;
};

Rgb base_colour(const std::string& cls) {
  static const std::map<std::string, Rgb> colours = {
      {"person", {0.92, 0.30, 0.22}}, {"car", {0.85, 0.18, 0.55}}, {"dog", {0.35, 0.80, 0.30}},
      {"bird", {0.20, 0.55, 0.90}},   {"pottedplant", {0.30, 0.70, 0.65}}};
  return colours.at(cls);
}

enum class ShapeKind { ellipse, rect, triangle };

bool inside(ShapeKind kind, double cx, double cy, double rx, double ry, double angle, double x, double y) {
  const double dx = x - cx, dy = y - cy;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
  switch (kind) {
    case ShapeKind::ellipse: return u * u + v * v <= 1.0;
    case ShapeKind::rect: return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case ShapeKind::triangle: return v <= 1.0 && v >= -1.0 && std::abs(u) <= (1.0 - v) * 0.5 + 1e-9;
  }
  return false;
}

}  // namespace

void generate_synthetic(const std::string& root, int count, int size, std::uint64_t seed) {
  if (count < 1) fail(ErrorCode::invalid_argument, "synthetic dataset needs at least one image");
  if (size < kMinImageSide) fail(ErrorCode::invalid_argument, "synthetic image size must be >= 8");
  const fs::path base(root);
  fs::create_directories(base / "JPEGImages");
  fs::create_directories(base / "SegmentationObject");
  fs::create_directories(base / "SegmentationClass");
  fs::create_directories(base / "ImageSets" / "Segmentation");
  std::ofstream list(base / "ImageSets" / "Segmentation" / "all.txt");

  const auto& interest = synthetic_interest_classes();
  const auto& other = synthetic_other_classes();
  const std::size_t npix = static_cast<std::size_t>(size) * size;
  const int min_pixels = std::max(4, static_cast<int>(npix / 80));

  for (int n = 0; n < count; ++n) {
    std::mt19937_64 rng(nn::derive_seed(seed, static_cast<std::uint64_t>(n)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.025);

    ImageSample img = make_image(size, size, 3);
    IndexMap obj{size, size, std::vector<std::uint8_t>(npix, 0)};
    IndexMap cls{size, size, std::vector<std::uint8_t>(npix, 0)};

    // Cluttered background: gradient, soft colour blobs, a texture wave and
    // pixel noise, at mid brightness.
    const double br = 0.2 + 0.35 * uni(rng), bg = 0.2 + 0.35 * uni(rng), bb = 0.2 + 0.35 * uni(rng);
    const double gx = (uni(rng) - 0.5) * 0.4, gy = (uni(rng) - 0.5) * 0.4;
    const double freq = 0.4 + 0.8 * uni(rng), phase = 6.28 * uni(rng);
    struct Blob {
      double x, y, r, dr, dg, db;
    };
    std::vector<Blob> blobs(4 + static_cast<std::size_t>(uni(rng) * 4.0));
    for (auto& b : blobs)
      b = {size * uni(rng), size * uni(rng), size * (0.08 + 0.2 * uni(rng)), 0.4 * (uni(rng) - 0.5),
           0.4 * (uni(rng) - 0.5), 0.4 * (uni(rng) - 0.5)};
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = static_cast<double>(x) / size, v = static_cast<double>(y) / size;
        const double wave = 0.08 * std::sin(freq * (x * 32.0 / size) + 0.7 * freq * (y * 32.0 / size) + phase);
        double r = br + gx * u + gy * v + wave, g = bg + gx * v - gy * u + wave, bl = bb - gx * u + wave;
        for (const auto& b : blobs) {
          const double d2 = ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.r * b.r);
          const double wgt = std::exp(-d2);
          r += b.dr * wgt;
          g += b.dg * wgt;
          bl += b.db * wgt;
        }
        img.pixels.at(y, x, 0) = r + 1.6 * noise(rng);
        img.pixels.at(y, x, 1) = g + 1.6 * noise(rng);
        img.pixels.at(y, x, 2) = bl + 1.6 * noise(rng);
      }

    // One guaranteed interest object plus up to two others, random z-order.
    std::vector<std::string> classes = {interest[static_cast<std::size_t>(uni(rng) * interest.size()) % interest.size()]};
    const int extra = static_cast<int>(uni(rng) * 3.0);
    for (int e = 0; e < extra; ++e) {
      const bool pick_interest = uni(rng) < 0.3;
      const auto& pool = pick_interest ? interest : other;
      classes.push_back(pool[static_cast<std::size_t>(uni(rng) * pool.size()) % pool.size()]);
    }
    std::shuffle(classes.begin(), classes.end(), rng);

    int instance = 0;
    for (const auto& c : classes) {
      const auto kind = static_cast<ShapeKind>(static_cast<int>(uni(rng) * 3.0) % 3);
      const double rx = size * (0.12 + 0.14 * uni(rng)), ry = size * (0.12 + 0.14 * uni(rng));
      const double cx = size * (0.2 + 0.6 * uni(rng)), cy = size * (0.2 + 0.6 * uni(rng));
      const double angle = 3.14159 * uni(rng);
      Rgb col = base_colour(c);
      const double jitter = 0.06;
      col.r = std::clamp(col.r + jitter * (uni(rng) - 0.5), 0.0, 1.0);
      col.g = std::clamp(col.g + jitter * (uni(rng) - 0.5), 0.0, 1.0);
      col.b = std::clamp(col.b + jitter * (uni(rng) - 0.5), 0.0, 1.0);
      const double shade = 0.12 * (uni(rng) - 0.5);
      ++instance;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          if (!inside(kind, cx, cy, rx, ry, angle, x + 0.5, y + 0.5)) continue;
          const double s = 1.0 + shade * ((x - cx) + (y - cy)) / size;
          img.pixels.at(y, x, 0) = col.r * s + noise(rng) * 0.5;
          img.pixels.at(y, x, 1) = col.g * s + noise(rng) * 0.5;
          img.pixels.at(y, x, 2) = col.b * s + noise(rng) * 0.5;
          const std::size_t p = static_cast<std::size_t>(y) * size + x;
          obj.values[p] = static_cast<std::uint8_t>(instance);
          cls.values[p] = static_cast<std::uint8_t>(*voc_class_index(c));
        }
    }
    clip_unit(img.pixels);

    // Drop instances that ended up (nearly) fully occluded, then renumber.
    std::vector<int> counts(static_cast<std::size_t>(instance) + 1, 0);
    for (auto v : obj.values) ++counts[v];
    std::vector<std::uint8_t> remap(static_cast<std::size_t>(instance) + 1, 0);
    int next = 0;
    for (int i = 1; i <= instance; ++i)
      if (counts[static_cast<std::size_t>(i)] >= min_pixels) remap[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(++next);
    bool has_interest = false;
    for (std::size_t p = 0; p < npix; ++p) {
      const auto v = obj.values[p];
      if (v && !remap[v]) {
        // Tiny remnants become background in the annotation only.
        obj.values[p] = 0;
        cls.values[p] = 0;
        continue;
      }
      obj.values[p] = remap[v];
      if (v) {
        const auto& name = voc_classes()[cls.values[p]];
        has_interest |= std::find(interest.begin(), interest.end(), name) != interest.end();
      }
    }
    if (!has_interest || next == 0) {
      // Re-draw this scene with a different stream.
      seed = nn::derive_seed(seed, 0xdeadULL, static_cast<std::uint64_t>(n));
      --n;
      continue;
    }

    char stem[32];
    std::snprintf(stem, sizeof(stem), "syn_%05d", n);
    img.source_id = stem;
    io::save_png((base / "JPEGImages" / (std::string(stem) + ".png")).string(), img);
    io::save_index_png((base / "SegmentationObject" / (std::string(stem) + ".png")).string(), obj);
    io::save_index_png((base / "SegmentationClass" / (std::string(stem) + ".png")).string(), cls);
    list << stem << '\n';
  }
}

}  // namespace lamsc::data
