// SPDX-License-Identifier: Apache-2.0
#include "lamsc/skb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lamsc/error.hpp"

namespace fs = std::filesystem;

namespace lamsc::skb {

std::size_t SegmentMask::pixel_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

SegmentMask SegmentMask::filled(int height, int width, std::uint8_t value, std::string label, double score) {
  return SegmentMask{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, value),
                     std::move(label), score};
}

std::size_t IntegrityReport::preserved_count() const {
  return static_cast<std::size_t>(std::count(preserved.begin(), preserved.end(), true));
}

BackendKind parse_backend(std::string_view name) {
  if (name == "oracle") return BackendKind::oracle;
  if (name == "trivial") return BackendKind::trivial;
  if (name == "foundation-adapter" || name == "adapter") return BackendKind::foundation_adapter;
  fail(ErrorCode::config, "unknown segmentation backend '" + std::string(name) +
                              "' (expected oracle, foundation-adapter or trivial)");
}

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::oracle: return "oracle";
    case BackendKind::foundation_adapter: return "foundation-adapter";
    case BackendKind::trivial: return "trivial";
  }
  return "?";
}

std::vector<SegmentMask> TrivialBackend::propose(const ImageSample& image) {
  return {SegmentMask::filled(image.height(), image.width(), 1, "image", 1.0)};
}

// -- oracle -------------------------------------------------------------------------

OracleBackend::OracleBackend(data::Dataset dataset, double tolerance)
    : dataset_(std::move(dataset)), tolerance_(tolerance) {
  if (!(tolerance_ >= 0.0)) fail(ErrorCode::config, "oracle tolerance must be >= 0");
}

const OracleBackend::Cached& OracleBackend::lookup(const std::string& stem) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = cache_.find(stem);
  if (it != cache_.end()) return it->second;
  const data::DatasetEntry* entry = dataset_.find(stem);
  if (!entry) fail(ErrorCode::io, "missing annotation file: no dataset entry for image '" + stem + "'");
  Cached c;
  c.instances = dataset_.load_annotation(*entry);
  c.reference = dataset_.load_image(static_cast<std::size_t>(entry - dataset_.entries().data()));
  return cache_.emplace(stem, std::move(c)).first->second;
}

std::vector<SegmentMask> OracleBackend::propose(const ImageSample& image) {
  const Cached& ann = lookup(image.source_id);
  if (image.height() != dataset_.height() || image.width() != dataset_.width())
    fail(ErrorCode::shape_mismatch, "oracle: image " + shape_str(image.pixels.shape()) +
                                        " does not match dataset resolution " + std::to_string(dataset_.height()) +
                                        "x" + std::to_string(dataset_.width()));
  const int h = image.height(), w = image.width();
  const int c = std::min(image.channels(), ann.reference.channels());
  std::vector<std::uint8_t> consistent(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double diff = 0.0;
      for (int ch = 0; ch < c; ++ch) diff += std::abs(image.pixels.at(y, x, ch) - ann.reference.pixels.at(y, x, ch));
      consistent[static_cast<std::size_t>(y) * w + x] = diff / c <= tolerance_ ? 1 : 0;
    }
  std::vector<SegmentMask> out;
  for (const auto& inst : ann.instances) {
    SegmentMask m = SegmentMask::filled(h, w, 0, inst.label, 1.0);
    for (std::size_t p = 0; p < m.bits.size(); ++p) m.bits[p] = inst.mask[p] & consistent[p];
    out.push_back(std::move(m));
  }
  return out;
}

// -- adapter --------------------------------------------------------------------------

namespace {

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char ch : s) {
    if (ch == '\'') q += "'\\''";
    else q += ch;
  }
  return q + "'";
}

}  // namespace

AdapterBackend::AdapterBackend(std::string command, std::string work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {
  if (command_.empty()) fail(ErrorCode::config, "foundation-adapter backend requires an adapter command");
}

std::vector<SegmentMask> AdapterBackend::propose(const ImageSample& image) {
  std::lock_guard<std::mutex> lock(mutex_);
  const fs::path call_dir = fs::path(work_dir_) / ("adapter_call_" + std::to_string(calls_++));
  fs::remove_all(call_dir);
  fs::create_directories(call_dir / "masks");
  const fs::path input = call_dir / "input.png";
  io::save_png(input.string(), image);
  const fs::path out_dir = call_dir / "masks";
  const std::string cmd = command_ + " " + shell_quote(input.string()) + " " + shell_quote(out_dir.string());
  const int status = std::system(cmd.c_str());
  if (status != 0)
    fail(ErrorCode::backend, "adapter process failed (status " + std::to_string(status) + "): " + cmd);

  const fs::path index = out_dir / "index.jsonl";
  std::ifstream in(index);
  if (!in) fail(ErrorCode::backend, "malformed adapter output: missing " + index.string());
  std::vector<SegmentMask> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SegmentMask m;
    try {
      const auto j = nlohmann::json::parse(line);
      fs::path mp = j.at("mask_path").get<std::string>();
      if (mp.is_relative()) mp = out_dir / mp;
      m = load_mask_png(mp.string());
      m.label = j.contains("label") && !j["label"].is_null() ? j["label"].get<std::string>() : std::string{};
      m.score = j.at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::backend, "malformed adapter output at " + index.string() + ":" + std::to_string(lineno) + ": " +
                                   e.what());
    } catch (const Error& e) {
      fail(ErrorCode::backend, "malformed adapter output at " + index.string() + ":" + std::to_string(lineno) + ": " +
                                   e.what());
    }
    if (!(m.score >= 0.0 && m.score <= 1.0))
      fail(ErrorCode::backend, "malformed adapter output: score outside [0,1] at line " + std::to_string(lineno));
    if (m.height != image.height() || m.width != image.width())
      fail(ErrorCode::backend, "malformed adapter output: mask size " + std::to_string(m.height) + "x" +
                                   std::to_string(m.width) + " does not match image");
    out.push_back(std::move(m));
  }
  return out;
}

// -- operations -------------------------------------------------------------------------

SegmentSet segment(const ImageSample& image, Backend& backend, int k_max) {
  validate_image(image);
  if (k_max < 1) fail(ErrorCode::config, "K_max must be >= 1");
  std::vector<SegmentMask> masks = backend.propose(image);
  masks.erase(std::remove_if(masks.begin(), masks.end(), [](const SegmentMask& m) { return m.pixel_count() == 0; }),
              masks.end());
  std::stable_sort(masks.begin(), masks.end(), [](const SegmentMask& a, const SegmentMask& b) { return a.score > b.score; });
  if (masks.size() > static_cast<std::size_t>(k_max)) masks.resize(static_cast<std::size_t>(k_max));
  if (masks.empty()) fail(ErrorCode::backend, backend.name() + " backend produced no segments for '" + image.source_id + "'");
  return SegmentSet{std::move(masks), image, backend.name()};
}

ImageSample extract_segment(const ImageSample& image, const SegmentMask& mask) {
  if (mask.height != image.height() || mask.width != image.width() ||
      mask.bits.size() != static_cast<std::size_t>(mask.height) * mask.width)
    fail(ErrorCode::shape_mismatch, "extract_segment: mask " + std::to_string(mask.height) + "x" +
                                        std::to_string(mask.width) + " vs image " + shape_str(image.pixels.shape()));
  ImageSample out = image;
  const int c = image.channels();
  for (std::size_t p = 0; p < mask.bits.size(); ++p)
    if (!mask.bits[p])
      for (int ch = 0; ch < c; ++ch) out.pixels[p * static_cast<std::size_t>(c) + static_cast<std::size_t>(ch)] = 0.0;
  return out;
}

double mask_iou(const SegmentMask& a, const SegmentMask& b) {
  if (a.bits.size() != b.bits.size()) fail(ErrorCode::shape_mismatch, "mask_iou: masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < a.bits.size(); ++p) {
    inter += a.bits[p] & b.bits[p];
    uni += a.bits[p] | b.bits[p];
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

IntegrityReport verify_recovery(const ImageSample& recovered, const SegmentSet& reference, Backend& backend,
                                double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::invalid_argument, "integrity threshold must be in (0,1)");
  if (recovered.height() != reference.source.height() || recovered.width() != reference.source.width())
    fail(ErrorCode::shape_mismatch, "verify_recovery: recovered image size differs from the reference source");
  ImageSample probe = recovered;
  if (probe.source_id.empty()) probe.source_id = reference.source.source_id;
  const std::vector<SegmentMask> found = backend.propose(probe);
  IntegrityReport report;
  report.threshold = threshold;
  for (const auto& ref : reference.masks) {
    double best = 0.0;
    for (const auto& m : found) best = std::max(best, mask_iou(ref, m));
    report.per_segment_iou.push_back(best);
    report.preserved.push_back(best >= threshold);
    report.labels.push_back(ref.label);
  }
  return report;
}

void save_mask_png(const std::string& path, const SegmentMask& mask) {
  IndexMap map{mask.height, mask.width, mask.bits};
  for (auto& v : map.values) v = v ? 255 : 0;
  io::save_index_png(path, map);
}

SegmentMask load_mask_png(const std::string& path) {
  IndexMap map = io::load_index_map(path);
  SegmentMask m{map.height, map.width, std::move(map.values), {}, 1.0};
  for (auto& v : m.bits) v = v ? 1 : 0;
  return m;
}

}  // namespace lamsc::skb
