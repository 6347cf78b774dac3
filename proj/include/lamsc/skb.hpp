// SPDX-License-Identifier: Apache-2.0
//
// Segmentation knowledge base: splits an image into single-object segments via
// a pluggable backend and checks whether the objects survive transmission.
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lamsc/dataset.hpp"
#include "lamsc/image.hpp"

namespace lamsc::skb {

inline constexpr int kDefaultKMax = 8;
inline constexpr double kDefaultIntegrityThreshold = 0.5;
inline constexpr double kDefaultOracleTolerance = 0.2;

struct SegmentMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // row-major, {0,1}
  std::string label;
  double score = 1.0;

  std::size_t pixel_count() const;
  static SegmentMask filled(int height, int width, std::uint8_t value, std::string label = {}, double score = 1.0);
};

struct SegmentSet {
  std::vector<SegmentMask> masks;
  ImageSample source;
  std::string backend_name;
};

struct IntegrityReport {
  std::vector<double> per_segment_iou;
  std::vector<bool> preserved;
  std::vector<std::string> labels;
  double threshold = kDefaultIntegrityThreshold;

  std::size_t preserved_count() const;
};

enum class BackendKind { oracle, foundation_adapter, trivial };
BackendKind parse_backend(std::string_view name);
std::string to_string(BackendKind kind);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  // Candidate masks for `image`, possibly empty, in backend order.
  virtual std::vector<SegmentMask> propose(const ImageSample& image) = 0;
};

// One all-ones mask covering the whole image.
class TrivialBackend final : public Backend {
 public:
  std::string name() const override { return "trivial"; }
  std::vector<SegmentMask> propose(const ImageSample& image) override;
};

// Annotation-driven segmenter. Looks the image up by source_id and returns one
// mask per annotated instance, restricted to pixels whose colour is within
// `tolerance` (mean absolute difference over channels) of the annotated
// source image. On the source itself this is exactly the annotation.
class OracleBackend final : public Backend {
 public:
  OracleBackend(data::Dataset dataset, double tolerance = kDefaultOracleTolerance);
  std::string name() const override { return "oracle"; }
  std::vector<SegmentMask> propose(const ImageSample& image) override;

 private:
  struct Cached {
    ImageSample reference;
    std::vector<data::AnnotatedInstance> instances;
  };
  const Cached& lookup(const std::string& stem);

  data::Dataset dataset_;
  double tolerance_;
  std::mutex mutex_;
  std::unordered_map<std::string, Cached> cache_;
};

// Out-of-process segmenter. Runs `<command> <image.png> <out_dir>`; the
// command writes one mask PNG per segment plus `<out_dir>/index.jsonl` with
// lines {"mask_path": ..., "label": ..., "score": ...}. mask_path may be
// relative to out_dir. A nonzero exit status is a failure.
class AdapterBackend final : public Backend {
 public:
  AdapterBackend(std::string command, std::string work_dir);
  std::string name() const override { return "foundation-adapter"; }
  std::vector<SegmentMask> propose(const ImageSample& image) override;

 private:
  std::string command_;
  std::string work_dir_;
  std::mutex mutex_;
  std::uint64_t calls_ = 0;
};

// Keeps the k_max highest-score non-empty masks (stable for ties).
SegmentSet segment(const ImageSample& image, Backend& backend, int k_max = kDefaultKMax);

ImageSample extract_segment(const ImageSample& image, const SegmentMask& mask);

double mask_iou(const SegmentMask& a, const SegmentMask& b);

// Re-segments `recovered` and scores every reference mask by its best IoU
// against the recovered masks.
IntegrityReport verify_recovery(const ImageSample& recovered, const SegmentSet& reference, Backend& backend,
                                double threshold = kDefaultIntegrityThreshold);

void save_mask_png(const std::string& path, const SegmentMask& mask);
SegmentMask load_mask_png(const std::string& path);

}  // namespace lamsc::skb
