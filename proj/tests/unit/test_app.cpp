// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <functional>
#include <json.hpp>

#include "fixtures.hpp"
#include "lamsc/app.hpp"
#include "lamsc/dataset.hpp"
#include "lamsc/error.hpp"

using namespace lamsc;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

config::RunConfig small_config(const std::string& out, std::vector<std::string> extra = {}) {
  ::unsetenv(config::kDatasetRootEnv);
  std::vector<std::string> o{"dataset_dir=" + fixtures::dataset(16, 32, 8),
                             "output_dir=" + out,
                             "max_images=12",
                             "eval_images=4",
                             "codec.width1=8",
                             "codec.width2=16",
                             "codec.channel_hidden=16",
                             "asi.epochs=2",
                             "train.epochs=1",
                             "train.crossed_rounds=1",
                             "train.mi_pairs=256",
                             "train.lr=0.002"};
  o.insert(o.end(), extra.begin(), extra.end());
  return config::parse_config("{}", o);
}

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return ErrorCode::internal;
}

Json read_json(const std::string& path) { return Json::parse(fixtures::read_file(path)); }

// Trains both variants (crossed) and the ASC mask once for the tests below.
const config::RunConfig& trained() {
  static const config::RunConfig cfg = [] {
    auto c = small_config(fixtures::scratch("app_trained"));
    app::cmd_train(c, training::Phase::crossed, app::Variant::both);
    app::cmd_train(c, training::Phase::asc, app::Variant::lamsc);
    return c;
  }();
  return cfg;
}

}  // namespace

TEST_SUITE("app") {
  TEST_CASE("workspace split holds out the last images") {
    const auto ws = app::Workspace::open(small_config(fixtures::scratch("app_ws")));
    CHECK(ws.eval_indices == std::vector<std::size_t>{12, 13, 14, 15});
    CHECK(ws.train_indices.size() == 12);
  }

  TEST_CASE("segment with the trivial and oracle backends") {
    const auto trivial = small_config(fixtures::scratch("app_seg"), {"backend=trivial"});
    const std::string out1 = fixtures::scratch("app_seg_t");
    const auto r1 = app::cmd_segment(trivial, "syn_00000", out1, true);
    CHECK(r1.mask_paths.size() == 1);
    CHECK(fs::exists(r1.preview_path));

    const auto oracle = small_config(fixtures::scratch("app_seg2"));
    const auto ds = data::Dataset::open(oracle.dataset_dir, 32, 32);
    const auto instances = ds.load_annotation(ds.entries()[0]);
    const auto r2 = app::cmd_segment(oracle, ds.entries()[0].stem, fixtures::scratch("app_seg_o"), true);
    CHECK(r2.mask_paths.size() == std::min<std::size_t>(instances.size(), static_cast<std::size_t>(oracle.k_max)));
    const auto manifest = read_json(r2.manifest_path);
    CHECK(manifest["segments"].size() == r2.mask_paths.size());
    CHECK(manifest["integration"] == "human_select");

    CHECK(code_of([&] { app::cmd_segment(oracle, "no_such_stem", fixtures::scratch("app_seg_x"), true); }) ==
          ErrorCode::io);
  }

  TEST_CASE("tiny images fail the segmentation precondition") {
    const std::string dir = fixtures::scratch("app_tiny");
    io::save_png(dir + "/tiny.png", make_image(4, 4, 3, "tiny", 0.5));
    const auto c = small_config(fixtures::scratch("app_tiny_out"), {"backend=trivial"});
    CHECK(code_of([&] { app::cmd_segment(c, dir + "/tiny.png", dir + "/out", true); }) == ErrorCode::precondition);
  }

  TEST_CASE("asc without an SC checkpoint names the missing artifact") {
    const auto c = small_config(fixtures::scratch("app_noasc"));
    std::string message;
    CHECK(code_of([&] { app::cmd_train(c, training::Phase::asc, app::Variant::lamsc); }, &message) ==
          ErrorCode::missing_artifact);
    CHECK(message.find(app::sc_checkpoint_name(true)) != std::string::npos);
    CHECK(code_of([&] { app::cmd_train(c, training::Phase::asc, app::Variant::baseline); }) ==
          ErrorCode::invalid_argument);
  }

  TEST_CASE("crossed training records its rounds and replays deterministically") {
    const auto& c = trained();
    const auto manifest = read_json(c.output_dir + "/manifest_train_crossed.json");
    REQUIRE(manifest["runs"].size() == 2);
    for (const auto& run : manifest["runs"]) {
      CHECK(run["phases_run"] == Json::array({"channel", "semantic"}));
      CHECK(run["round_log"].size() == 2);
      CHECK(run["rounds_run"] == 1);
    }
    const auto again = small_config(fixtures::scratch("app_replay"));
    app::cmd_train(again, training::Phase::crossed, app::Variant::both);
    for (const char* f : {"loss_crossed_lamsc.csv", "loss_crossed_baseline.csv", "sc_lamsc.ckpt", "sc_baseline.ckpt"}) {
      INFO(f);
      CHECK(fixtures::read_file(c.output_dir + "/" + f) == fixtures::read_file(again.output_dir + "/" + f));
    }
  }

  TEST_CASE("asc manifest reports the mask ratio") {
    const auto& c = trained();
    const auto manifest = read_json(c.output_dir + "/manifest_train_asc.json");
    REQUIRE(manifest["runs"].size() == 1);
    const double ratio = manifest["runs"][0]["final_mask_ratio"];
    CHECK(ratio >= 0.0);
    CHECK(ratio <= 1.0);
    CHECK(manifest["runs"][0]["feature_elements"] == 8 * 8 * 16);
  }

  TEST_CASE("eval writes one row per variant and SNR") {
    const auto& c = trained();
    const auto r = app::cmd_eval(c);
    CHECK(r.rows == 10);
    CHECK(eval::read_metrics_csv(r.curves.csv).size() == 10);
    CHECK(fs::exists(r.curves.psnr_plot));
    CHECK(fs::exists(r.bit_summary_path));
    CHECK(read_json(r.manifest_path)["lamsc_mask"] == true);

    auto empty = c;
    empty.eval_snr_list.clear();
    CHECK(code_of([&] { app::cmd_eval(empty); }) == ErrorCode::invalid_argument);

    const auto report = app::cmd_report(c);
    CHECK(fs::exists(report.summary_path));
    CHECK(code_of([] { app::cmd_report(small_config(fixtures::scratch("app_noeval"))); }) ==
          ErrorCode::missing_artifact);
  }

  TEST_CASE("eval without checkpoints is a missing artifact") {
    CHECK(code_of([] { app::cmd_eval(small_config(fixtures::scratch("app_nockpt"))); }) == ErrorCode::missing_artifact);
  }

  TEST_CASE("transmit writes its artifacts") {
    const auto& c = trained();
    const std::string out = fixtures::scratch("app_tx");
    const auto r = app::cmd_transmit(c, "syn_00013", out, {});
    for (const auto& p : {r.recovered_path, r.semantic_aware_path, r.integrity_path, r.bit_report_path, r.manifest_path})
      CHECK(fs::exists(p));
    CHECK(r.bits.feature_elements == 8 * 8 * 16);
    CHECK(r.bits.retained_elements <= r.bits.feature_elements);
    CHECK(read_json(r.manifest_path)["mask"] == "asc");
    CHECK(r.integrity.labels.size() == r.integrity.per_segment_iou.size());

    app::TransmitOptions full;
    full.full_mask = true;
    full.noise_variance = 0.0;
    const auto f = app::cmd_transmit(c, "syn_00013", fixtures::scratch("app_tx_full"), full);
    CHECK(f.bits.retained_elements == f.bits.feature_elements);
    CHECK(read_json(f.manifest_path)["mask"] == "full");

    const std::string dir = fixtures::scratch("app_tx_tiny");
    io::save_png(dir + "/tiny.png", make_image(4, 4, 3, "tiny", 0.5));
    auto trivial = c;
    trivial.backend = skb::BackendKind::trivial;
    CHECK(code_of([&] { app::cmd_transmit(trivial, dir + "/tiny.png", dir + "/out", {}); }) == ErrorCode::precondition);
  }

  TEST_CASE("variant names") {
    CHECK(app::parse_variant("lamsc") == app::Variant::lamsc);
    CHECK(app::parse_variant("baseline") == app::Variant::baseline);
    CHECK(app::parse_variant("both") == app::Variant::both);
    CHECK_THROWS_AS(app::parse_variant("other"), Error);
  }
}
