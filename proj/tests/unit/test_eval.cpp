// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "lamsc/dataset.hpp"
#include "lamsc/error.hpp"
#include "lamsc/eval.hpp"
#include "oracles.hpp"

using namespace lamsc;
namespace fs = std::filesystem;

namespace {

codec::FeatureTensor features_of_shape(const Shape& s) {
  codec::FeatureTensor f;
  f.data = Tensor(s);
  return f;
}

eval::MetricsRow sample_row(double snr, const std::string& variant) {
  eval::MetricsRow r;
  r.variant = variant;
  r.snr_db = snr;
  r.seed = 3;
  r.psnr_db = 17.0 + snr / 3.0;
  r.ssim = 0.4 + snr / 100.0;
  r.psnr_vs_original_db = 1.0 / 3.0;
  r.ssim_vs_original = 0.1;
  r.loss = 0.0123456789012345678;
  r.mask_ratio = 0.41421356;
  r.elements_original = 3072;
  r.elements_features = 4096;
  r.elements_retained = 1700;
  r.bits_at_precision = 13600;
  r.config_digest = "abc123";
  return r;
}

struct SweepFixture {
  std::vector<ImageSample> images;
  training::ScModel lamsc = training::make_model(codec::CodecArch{}, 64, 1);
  training::ScModel baseline = training::make_model(codec::CodecArch{}, 64, 2);

  SweepFixture() {
    images = data::Dataset::open(fixtures::dataset(), 32, 32).load_all();
    images.resize(4);
  }

  eval::SweepInput input() const {
    eval::SweepInput in;
    in.originals = images;
    in.semantic_aware = images;
    for (auto& img : in.semantic_aware)
      for (std::size_t i = 0; i < img.pixels.size(); i += 2) img.pixels[i] = 0.0;
    in.lamsc = &lamsc;
    in.baseline = &baseline;
    in.lamsc_mask = false;
    in.config_digest = "d";
    return in;
  }
};

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("psnr examples") {
    const auto a = oracle::random_image(8, 8, 3, 1);
    CHECK(eval::psnr(a, a) == eval::kPsnrCap);
    CHECK(eval::psnr(make_image(8, 8, 3, "", 0.0), make_image(8, 8, 3, "", 1.0)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(eval::psnr(a, make_image(8, 9, 3)), Error);
  }

  TEST_CASE("psnr matches the brute-force formula and is symmetric") {
    for (int i = 0; i < 100; ++i) {
      const auto a = oracle::random_image(8, 8, i % 2 ? 3 : 1, 2 * i + 10), b = oracle::random_image(8, 8, i % 2 ? 3 : 1, 2 * i + 11);
      CHECK(std::abs(eval::psnr(a, b) - oracle::psnr(a, b)) <= 1e-9);
      CHECK(eval::psnr(a, b) == eval::psnr(b, a));
      CHECK(eval::psnr(a, b) >= 0.0);
    }
  }

  TEST_CASE("ssim examples") {
    const auto a = oracle::random_image(16, 16, 3, 2);
    CHECK(eval::ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    const double c1 = 1e-4;
    CHECK(eval::ssim(make_image(16, 16, 1, "", 0.0), make_image(16, 16, 1, "", 1.0)) ==
          doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-9));
    CHECK_THROWS_AS(eval::ssim(make_image(10, 16, 3), make_image(10, 16, 3)), Error);
  }

  TEST_CASE("ssim matches the windowed reference and is symmetric") {
    for (int i = 0; i < 30; ++i) {
      const auto a = oracle::random_image(16, 16 + i % 3, 3, 3 * i + 100);
      auto b = a;
      const auto noise = oracle::random_image(16, 16 + i % 3, 3, 3 * i + 101);
      for (std::size_t k = 0; k < b.pixels.size(); ++k) b.pixels[k] = std::clamp(0.7 * b.pixels[k] + 0.3 * noise.pixels[k] * (i % 4), 0.0, 1.0);
      CHECK(std::abs(eval::ssim(a, b) - oracle::ssim(a, b)) <= 1e-6);
      CHECK(std::abs(eval::ssim(a, b) - eval::ssim(b, a)) <= 1e-12);
      CHECK(eval::ssim(a, a) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("bit accounting examples") {
    const auto img = make_image(128, 128, 3);
    auto mask = codec::full_mask({13, 13, 128});
    std::fill(mask.bits.begin() + 8960, mask.bits.end(), 0);
    mask.retained_count = 8960;
    const auto r = eval::bit_account(img, features_of_shape({13, 13, 128}), mask, 8);
    CHECK(r.original_elements == 49152);
    CHECK(r.feature_elements == 21632);
    CHECK(r.retained_elements == 8960);

    auto zero = codec::full_mask({13, 13, 128});
    std::fill(zero.bits.begin(), zero.bits.end(), 0);
    zero.retained_count = 0;
    CHECK(eval::bit_account(img, features_of_shape({13, 13, 128}), zero).retained_elements == 0);

    auto checker = codec::full_mask({8, 8, 4});
    checker.retained_count = 0;
    for (std::size_t i = 0; i < checker.bits.size(); ++i) {
      const std::size_t y = i / 32, x = (i / 4) % 8;
      checker.bits[i] = (x + y) % 2;
      checker.retained_count += checker.bits[i];
    }
    const auto c = eval::bit_account(make_image(32, 32, 3), features_of_shape({8, 8, 4}), checker, 8);
    CHECK(c.retained_elements == 128);
    CHECK(c.retained_bits == 1024);
    CHECK(c.mask_side_info_bits == 256);
    CHECK(c.retained_bits_with_side_info == 1024 + 256);
    CHECK(c.original_bits == 3072 * 8);
    CHECK(c.feature_bits == 256 * 8);
    CHECK(c.retained_elements <= c.feature_elements);
  }

  TEST_CASE("bit report totals are exact for any mask and precision") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      auto m = codec::full_mask({4, 4, 8});
      m.retained_count = 0;
      for (auto& b : m.bits) {
        b = rng() % 2;
        m.retained_count += b;
      }
      const int bpe = 1 + trial % 16;
      const auto r = eval::bit_account(make_image(16, 16, 1), features_of_shape({4, 4, 8}), m, bpe);
      CHECK(r.retained_bits == r.retained_elements * static_cast<std::uint64_t>(bpe));
      CHECK(r.retained_bits_with_side_info == r.retained_bits + r.feature_elements);
      CHECK(r.retained_elements <= r.feature_elements);
    }
  }

  TEST_CASE("sweep cardinality and ordering") {
    SweepFixture fx;
    auto in = fx.input();
    in.snr_list = {0, 5, 10, 15, 20};
    in.seeds = {1};
    const auto rows = eval::snr_sweep(in);
    REQUIRE(rows.size() == 10);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].snr_db == in.snr_list[i / 2]);
      CHECK(rows[i].variant == (i % 2 ? "lamsc" : "baseline"));
      CHECK(rows[i].elements_retained <= rows[i].elements_features);
      CHECK(rows[i].psnr_db >= 0.0);
      CHECK(rows[i].config_digest == "d");
    }
    in.snr_list = {0, 10};
    in.seeds = {1, 2, 3};
    CHECK(eval::snr_sweep(in).size() == 12);
    in.snr_list.clear();
    CHECK_THROWS_AS(eval::snr_sweep(in), Error);
  }

  TEST_CASE("sweep without a checkpoint is a missing artifact") {
    SweepFixture fx;
    auto in = fx.input();
    in.snr_list = {10};
    in.seeds = {1};
    in.baseline = nullptr;
    try {
      eval::snr_sweep(in);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::missing_artifact);
    }
  }

  TEST_CASE("noiseless sweep equals the channel-free autoencoder path") {
    SweepFixture fx;
    auto in = fx.input();
    in.snr_list = {20};
    in.seeds = {1};
    in.noise_variance_override = 0.0;
    const auto rows = eval::snr_sweep(in);
    for (const bool lamsc : {false, true}) {
      const auto& model = lamsc ? fx.lamsc : fx.baseline;
      const auto& sources = lamsc ? in.semantic_aware : in.originals;
      double total = 0;
      for (const auto& src : sources) {
        const auto f = codec::semantic_encode(src, model.codec);
        const auto sym = channel::channel_encode(f, model.channel);
        const auto back = channel::channel_decode(sym, model.channel, f.data.shape(), f.source_shape);
        total += oracle::psnr(codec::semantic_decode(back, model.codec), src);
      }
      CHECK(rows[lamsc ? 1 : 0].psnr_db == doctest::Approx(total / static_cast<double>(sources.size())).epsilon(1e-12));
    }
  }

  TEST_CASE("metrics CSV round trips exactly") {
    std::vector<eval::MetricsRow> rows{sample_row(0, "baseline"), sample_row(0, "lamsc"), sample_row(20, "lamsc")};
    rows[2].psnr_db = 100.0;
    const std::string path = fixtures::scratch("csv") + "/metrics.csv";
    eval::write_metrics_csv(path, rows);
    CHECK(eval::read_metrics_csv(path) == rows);
  }

  TEST_CASE("emit_curves writes CSV and plots and is idempotent") {
    const std::string dir = fixtures::scratch("curves");
    const std::vector<eval::MetricsRow> one{sample_row(10, "lamsc")};
    const auto p = eval::emit_curves(one, {}, dir);
    const std::string csv = fixtures::read_file(p.csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    for (const auto& f : {p.loss_plot, p.psnr_plot, p.ssim_plot}) {
      CHECK(fs::exists(f));
      CHECK(fixtures::read_file(f).substr(1, 3) == "PNG");
    }
    std::vector<eval::MetricsRow> table;
    for (double snr : {0.0, 10.0, 20.0})
      for (const char* v : {"baseline", "lamsc"}) table.push_back(sample_row(snr, v));
    std::vector<training::TraceRow> trace;
    for (long i = 0; i < 5; ++i) trace.push_back({i, "lamsc crossed", 1.0 / (i + 1), 1.0, 10.0, 1});
    eval::emit_curves(table, trace, dir);
    const std::string first = fixtures::read_file(p.csv), plot1 = fixtures::read_file(p.psnr_plot);
    eval::emit_curves(table, trace, dir);
    CHECK(fixtures::read_file(p.csv) == first);
    CHECK(fixtures::read_file(p.psnr_plot) == plot1);
    CHECK(eval::read_metrics_csv(p.csv).size() == table.size());
    CHECK_THROWS_AS(eval::emit_curves({}, {}, dir), Error);
  }

  TEST_CASE("emit_curves into an unwritable location fails") {
    const std::string dir = fixtures::scratch("unwritable");
    fixtures::write_file(dir + "/file", "x");
    CHECK_THROWS_AS(eval::emit_curves({sample_row(0, "lamsc")}, {}, dir + "/file/sub"), Error);
  }
}
