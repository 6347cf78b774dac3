// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "lamsc/error.hpp"
#include "lamsc/skb.hpp"
#include "oracles.hpp"

using namespace lamsc;
namespace fs = std::filesystem;

namespace {

// 16x16 scene with two rectangles: a red "person" and a blue "car".
std::string toy_dataset() {
  const std::string root = fixtures::scratch("toy");
  for (const char* d : {"JPEGImages", "SegmentationObject", "SegmentationClass"}) fs::create_directories(fs::path(root) / d);
  ImageSample img = make_image(16, 16, 3, "", 0.5);
  IndexMap obj{16, 16, std::vector<std::uint8_t>(256, 0)}, cls = obj;
  auto paint = [&](int y0, int y1, int x0, int x1, double r, double g, double b, int id, int c) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        img.pixels.at(y, x, 0) = r;
        img.pixels.at(y, x, 1) = g;
        img.pixels.at(y, x, 2) = b;
        obj.values[static_cast<std::size_t>(y) * 16 + x] = static_cast<std::uint8_t>(id);
        cls.values[static_cast<std::size_t>(y) * 16 + x] = static_cast<std::uint8_t>(c);
      }
  };
  paint(2, 7, 2, 9, 0.9, 0.1, 0.1, 1, *data::voc_class_index("person"));
  paint(9, 15, 5, 14, 0.1, 0.2, 0.9, 2, *data::voc_class_index("car"));
  obj.values[0] = 255;  // void pixel
  io::save_png(root + "/JPEGImages/toy.png", img);
  io::save_index_png(root + "/SegmentationObject/toy.png", obj);
  io::save_index_png(root + "/SegmentationClass/toy.png", cls);
  return root;
}

skb::SegmentMask random_mask(int h, int w, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  auto m = skb::SegmentMask::filled(h, w, 0);
  for (auto& v : m.bits) v = b(rng) ? 1 : 0;
  return m;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

}  // namespace

TEST_SUITE("skb") {
  TEST_CASE("trivial backend yields one all-ones mask") {
    skb::TrivialBackend backend;
    const auto set = skb::segment(oracle::random_image(10, 12, 3, 1), backend);
    REQUIRE(set.masks.size() == 1);
    CHECK(set.masks[0].pixel_count() == 120);
    CHECK(set.backend_name == "trivial");
  }

  TEST_CASE("images smaller than 8x8 are rejected") {
    skb::TrivialBackend backend;
    CHECK(code_of([&] { skb::segment(make_image(4, 4, 3), backend); }) == ErrorCode::precondition);
  }

  TEST_CASE("oracle masks equal the annotation bitmaps") {
    const std::string root = toy_dataset();
    auto ds = data::Dataset::open(root, 16, 16);
    skb::OracleBackend backend(ds);
    const auto img = ds.load_image(0);
    const auto set = skb::segment(img, backend);
    int h = 0, w = 0;
    const auto ids = oracle::read_png_indices(root + "/SegmentationObject/toy.png", h, w);
    REQUIRE(set.masks.size() == 2);
    for (int k = 0; k < 2; ++k)
      for (std::size_t p = 0; p < ids.size(); ++p) CHECK(set.masks[static_cast<std::size_t>(k)].bits[p] == (ids[p] == k + 1));
    CHECK(set.masks[0].label == "person");
    CHECK(set.masks[1].label == "car");
    // Deterministic on repeat.
    const auto again = skb::segment(img, backend);
    for (std::size_t k = 0; k < 2; ++k) CHECK(again.masks[k].bits == set.masks[k].bits);
  }

  TEST_CASE("oracle without an annotation entry is an io error") {
    auto ds = data::Dataset::open(toy_dataset(), 16, 16);
    skb::OracleBackend backend(ds);
    auto img = ds.load_image(0);
    img.source_id = "unknown";
    CHECK(code_of([&] { skb::segment(img, backend); }) == ErrorCode::io);
  }

  TEST_CASE("extract_segment examples") {
    const auto img = oracle::random_image(8, 8, 3, 3);
    CHECK(skb::extract_segment(img, skb::SegmentMask::filled(8, 8, 1)).pixels.storage() == img.pixels.storage());
    auto one = skb::SegmentMask::filled(8, 8, 0);
    one.bits[19] = 1;
    const auto single = skb::extract_segment(img, one);
    int nonzero_positions = 0;
    for (int p = 0; p < 64; ++p) {
      bool nz = false;
      for (int c = 0; c < 3; ++c) nz |= single.pixels[static_cast<std::size_t>(p) * 3 + c] != 0.0;
      nonzero_positions += nz;
    }
    CHECK(nonzero_positions == 1);
    std::mt19937_64 rng(4);
    const auto m = random_mask(8, 8, rng);
    const auto out = skb::extract_segment(img, m);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c)
          CHECK(out.pixels.at(y, x, c) == img.pixels.at(y, x, c) * m.bits[static_cast<std::size_t>(y) * 8 + x]);
    CHECK(code_of([&] { skb::extract_segment(img, skb::SegmentMask::filled(8, 9, 1)); }) == ErrorCode::shape_mismatch);
  }

  TEST_CASE("extract_segment is idempotent and additive over disjoint masks") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 25; ++trial) {
      const auto img = oracle::random_image(9, 11, trial % 2 ? 3 : 1, 100 + trial);
      const auto m = random_mask(9, 11, rng);
      const auto once = skb::extract_segment(img, m);
      CHECK(skb::extract_segment(once, m).pixels.storage() == once.pixels.storage());

      // Partition into three disjoint masks.
      std::uniform_int_distribution<int> pick(0, 3);
      std::vector<skb::SegmentMask> parts(3, skb::SegmentMask::filled(9, 11, 0));
      auto uni = skb::SegmentMask::filled(9, 11, 0);
      for (std::size_t p = 0; p < uni.bits.size(); ++p) {
        const int k = pick(rng);
        if (k < 3) parts[static_cast<std::size_t>(k)].bits[p] = uni.bits[p] = 1;
      }
      Tensor sum(img.pixels.shape());
      for (const auto& part : parts) {
        const auto e = skb::extract_segment(img, part);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e.pixels[i];
      }
      CHECK(sum.storage() == skb::extract_segment(img, uni).pixels.storage());
    }
  }

  TEST_CASE("verify_recovery on the source, a blank image and an erased object") {
    auto ds = data::Dataset::open(toy_dataset(), 16, 16);
    skb::OracleBackend backend(ds);
    const auto img = ds.load_image(0);
    const auto set = skb::segment(img, backend);

    const auto same = skb::verify_recovery(img, set, backend);
    for (double iou : same.per_segment_iou) CHECK(iou == 1.0);
    CHECK(same.preserved_count() == 2);

    auto blank = img;
    blank.pixels.fill(0.0);
    for (double iou : skb::verify_recovery(blank, set, backend).per_segment_iou) CHECK(iou == 0.0);

    auto erased = img;
    for (std::size_t p = 0; p < set.masks[0].bits.size(); ++p)
      if (set.masks[0].bits[p])
        for (int c = 0; c < 3; ++c) erased.pixels[p * 3 + static_cast<std::size_t>(c)] = 0.0;
    const auto report = skb::verify_recovery(erased, set, backend);
    const auto found = backend.propose(erased);
    for (std::size_t k = 0; k < set.masks.size(); ++k) {
      double best = 0;
      for (const auto& f : found) best = std::max(best, oracle::iou(set.masks[k].bits, f.bits));
      CHECK(report.per_segment_iou[k] == best);
      CHECK(report.preserved[k] == (best >= 0.5));
    }
    CHECK(report.per_segment_iou[0] < 0.5);
    CHECK(report.per_segment_iou[1] >= 0.5);
  }

  TEST_CASE("verify_recovery on synthetic scenes gives IoU 1 against the source") {
    auto ds = data::Dataset::open(fixtures::dataset(), 32, 32);
    skb::OracleBackend backend(ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto img = ds.load_image(i);
      const auto set = skb::segment(img, backend);
      for (double iou : skb::verify_recovery(img, set, backend).per_segment_iou) CHECK(iou == 1.0);
    }
  }

  TEST_CASE("preserved flags follow the threshold") {
    auto ds = data::Dataset::open(toy_dataset(), 16, 16);
    skb::OracleBackend backend(ds);
    const auto img = ds.load_image(0);
    const auto set = skb::segment(img, backend);
    auto partial = img;
    // Erase the top three of five rows of the first object: IoU = 2/5.
    for (int y = 2; y < 5; ++y)
      for (int x = 2; x < 9; ++x)
        for (int c = 0; c < 3; ++c) partial.pixels.at(y, x, c) = 0.0;
    for (double t : {0.3, 0.4, 0.45, 0.9}) {
      const auto r = skb::verify_recovery(partial, set, backend, t);
      CHECK(r.per_segment_iou[0] == doctest::Approx(0.4));
      for (std::size_t k = 0; k < r.preserved.size(); ++k) CHECK(r.preserved[k] == (r.per_segment_iou[k] >= t));
    }
    CHECK_THROWS_AS(skb::verify_recovery(partial, set, backend, 1.0), Error);
  }

  TEST_CASE("adapter backend clamps to the K_max highest scores") {
    skb::AdapterBackend backend(std::string(FAKE_SEGMENTER) + " bands", fixtures::scratch("adapter_ok"));
    const auto img = oracle::random_image(20, 10, 3, 5);
    const auto set = skb::segment(img, backend, 3);
    REQUIRE(set.masks.size() == 3);
    CHECK(set.masks[0].label == "band4");
    CHECK(set.masks[1].label == "band3");
    CHECK(set.masks[2].label == "band2");
    CHECK(set.masks[0].score == doctest::Approx(0.5));
    CHECK(set.masks[0].pixel_count() == 40);
    CHECK(set.backend_name == "foundation-adapter");
  }

  TEST_CASE("adapter failures and malformed output are backend errors") {
    const auto img = oracle::random_image(12, 12, 3, 6);
    for (const char* mode : {"fail", "garbage", "badscore", "wrongsize", "noindex"}) {
      CAPTURE(mode);
      skb::AdapterBackend backend(std::string(FAKE_SEGMENTER) + " " + mode, fixtures::scratch(std::string("adapter_") + mode));
      CHECK(code_of([&] { skb::segment(img, backend); }) == ErrorCode::backend);
    }
  }

  TEST_CASE("mask png round trip") {
    std::mt19937_64 rng(8);
    const auto m = random_mask(9, 14, rng);
    const std::string path = fixtures::scratch("maskpng") + "/m.png";
    skb::save_mask_png(path, m);
    CHECK(skb::load_mask_png(path).bits == m.bits);
  }
}
