// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lamsc/dataset.hpp"
#include "lamsc/error.hpp"
#include "lamsc/training.hpp"
#include "oracles.hpp"

using namespace lamsc;
using training::Phase;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

std::vector<ImageSample> images(int count, int size = 32, std::uint64_t seed = 9) {
  const auto ds = data::Dataset::open(fixtures::dataset(count, size, seed), size, size);
  return ds.load_all();
}

codec::CodecArch small_arch() {
  codec::CodecArch a;
  a.width1 = 8;
  a.width2 = 16;
  a.mask_hidden = 8;
  return a;
}

training::TrainConfig quick_config() {
  training::TrainConfig c;
  c.lr = 2e-3;
  c.epochs = 2;
  c.batch = 8;
  c.crossed_rounds = 1;
  c.mi_pairs = 256;
  return c;
}

std::vector<std::string> digests(const training::ScModel& m) {
  return {m.codec.encoder.digest(), m.codec.decoder.digest(), m.codec.mask_net.digest(),
          m.channel.encoder.digest(), m.channel.decoder.digest(), m.mi.net.digest()};
}

// Small SC model trained once per process and reused by the ASC tests.
const training::ScModel& trained_small_model() {
  static const training::ScModel model = [] {
    auto m = training::make_model(small_arch(), 32, 3);
    auto cfg = quick_config();
    cfg.epochs = 4;
    const auto imgs = images(60);
    training::crossed_train(imgs, imgs, cfg, m);
    return m;
  }();
  return model;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config validation") {
    training::TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.lr = -1;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::config);
    c = {};
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.crossed_rounds = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.channel_epochs = 3;
    CHECK(c.epochs_for(Phase::channel) == 3);
    CHECK(c.epochs_for(Phase::semantic) == c.epochs);
    CHECK(training::parse_phase("crossed") == Phase::crossed);
    CHECK(training::to_string(Phase::asc) == "asc");
    CHECK_THROWS_AS(training::parse_phase("joint"), Error);
  }

  TEST_CASE("channel phase on a small identity-capable toy halves the feature MSE") {
    codec::CodecArch a;
    a.width1 = 4;
    a.width2 = 8;
    a.mask_hidden = 4;
    auto m = training::make_model(a, 16, 4);
    std::vector<Tensor> feats;
    for (int i = 0; i < 40; ++i) {
      Tensor f({2, 2, 8});
      oracle::randomize(f, 100 + i);
      for (auto& v : f.values()) v = std::abs(v);
      feats.push_back(f);
    }
    auto cfg = quick_config();
    cfg.snr_db_train = 20;
    cfg.epochs = 20;
    cfg.lr = 5e-3;
    const auto before = digests(m);
    const auto r = training::train_channel_phase(feats, cfg, m);
    CHECK(r.aux_trace.back() < 0.5 * r.aux_trace.front());
    CHECK(r.loss_trace.back() <= r.loss_trace.front());
    const auto after = digests(m);
    for (int i = 0; i < 3; ++i) CHECK(after[static_cast<std::size_t>(i)] == before[static_cast<std::size_t>(i)]);
    CHECK(r.freeze.frozen_module_names.size() == 3);
  }

  TEST_CASE("channel round trip at 20 dB: held-out relative feature MSE below 0.05") {
    auto m = training::make_model(codec::CodecArch{}, 128, 5);
    const auto imgs = images(210);
    std::vector<Tensor> train, held;
    for (std::size_t i = 0; i < imgs.size(); ++i)
      (i < 200 ? train : held).push_back(codec::encoder_forward(m.codec, imgs[i].pixels, nullptr));
    auto cfg = quick_config();
    cfg.snr_db_train = 20;
    cfg.epochs = 10;
    cfg.lr = 1e-3;
    training::train_channel_phase(train, cfg, m);
    double err = 0, energy = 0;
    for (std::size_t i = 0; i < held.size(); ++i) {
      codec::FeatureTensor f{held[i], {32, 32, 3}};
      const auto sym = channel::channel_encode(f, m.channel);
      const auto rx = channel::transmit(sym, channel::ChannelConfig{channel::ChannelKind::awgn, 20.0, 77 + i, {}});
      const auto back = channel::channel_decode(rx, m.channel, held[i].shape(), {32, 32, 3});
      for (std::size_t k = 0; k < held[i].size(); ++k) {
        err += std::pow(back.data[k] - held[i][k], 2);
        energy += held[i][k] * held[i][k];
      }
    }
    CAPTURE(err / energy);
    CHECK(err / energy < 0.05);
  }

  TEST_CASE("lr 0 leaves every parameter unchanged and the trace constant") {
    auto m = training::make_model(small_arch(), 32, 6);
    const auto imgs = images(12);
    auto cfg = quick_config();
    cfg.lr = 0.0;
    cfg.epochs = 3;
    const auto before = digests(m);
    std::vector<Tensor> feats;
    for (const auto& img : imgs) feats.push_back(codec::encoder_forward(m.codec, img.pixels, nullptr));
    const auto rc = training::train_channel_phase(feats, cfg, m);
    const auto rs = training::train_semantic_phase(imgs, cfg, m);
    const auto ra = training::train_asc(imgs, cfg, m);
    CHECK(digests(m) == before);
    for (const auto* r : {&rc, &rs, &ra})
      for (double v : r->loss_trace) CHECK(v == r->loss_trace.front());
  }

  TEST_CASE("semantic phase keeps the channel frozen and halves the loss on 200 images") {
    auto m = training::make_model(codec::CodecArch{}, 128, 7);
    const auto imgs = images(200);
    auto cfg = quick_config();
    cfg.epochs = 4;
    const auto before = digests(m);
    const auto r = training::train_semantic_phase(imgs, cfg, m);
    const auto after = digests(m);
    for (std::size_t i = 2; i < 6; ++i) CHECK(after[i] == before[i]);
    CAPTURE(r.loss_trace);
    CHECK(r.loss_trace.back() < 0.5 * r.loss_trace.front());
    for (double v : r.loss_trace) CHECK(std::isfinite(v));
  }

  TEST_CASE("single-image semantic phase trends downward over 50 epochs") {
    auto m = training::make_model(small_arch(), 32, 8);
    const auto imgs = images(12);
    auto cfg = quick_config();
    cfg.lr = 1e-3;
    cfg.epochs = 50;
    cfg.batch = 1;
    const auto r = training::train_semantic_phase({imgs[0]}, cfg, m);
    CHECK(r.loss_trace.back() < r.loss_trace.front());
    // Least-squares slope over the trace.
    const double n = static_cast<double>(r.loss_trace.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
      sx += static_cast<double>(i);
      sy += r.loss_trace[i];
      sxy += static_cast<double>(i) * r.loss_trace[i];
      sxx += static_cast<double>(i * i);
    }
    CHECK((n * sxy - sx * sy) / (n * sxx - sx * sx) < 0.0);
  }

  TEST_CASE("crossed training with one round runs channel then semantic") {
    auto m = training::make_model(small_arch(), 32, 9);
    const auto imgs = images(12);
    const auto r = training::crossed_train(imgs, imgs, quick_config(), m);
    REQUIRE(r.log.size() == 2);
    CHECK(r.log[0].module == "channel");
    CHECK(r.log[1].module == "semantic");
    REQUIRE(r.phases.size() == 2);
    CHECK(r.phases[0].phase == Phase::channel);
    CHECK(r.phases[1].phase == Phase::semantic);
    CHECK(r.rounds_run == 1);
    // The semantic digest changes only in the semantic step, the channel digest only in the channel step.
    CHECK(r.log[0].semantic_digest != r.log[1].semantic_digest);
    CHECK(r.log[0].channel_digest == r.log[1].channel_digest);
  }

  TEST_CASE("a huge convergence eps stops after round one") {
    auto m = training::make_model(small_arch(), 32, 10);
    auto cfg = quick_config();
    cfg.crossed_rounds = 4;
    cfg.convergence_eps = 1e9;
    const auto r = training::crossed_train(images(12), {}, cfg, m);
    CHECK(r.rounds_run == 1);
    CHECK(r.converged);
    CHECK(r.round_end_losses.size() == 1);
  }

  TEST_CASE("round log alternates channel and semantic and training is reproducible") {
    auto cfg = quick_config();
    cfg.crossed_rounds = 3;
    cfg.convergence_eps = 0;
    cfg.epochs = 1;
    const auto imgs = images(12);
    auto a = training::make_model(small_arch(), 32, 11), b = training::make_model(small_arch(), 32, 11);
    const auto ra = training::crossed_train(imgs, imgs, cfg, a);
    const auto rb = training::crossed_train(imgs, imgs, cfg, b);
    for (std::size_t i = 0; i < ra.log.size(); ++i) CHECK(ra.log[i].module == (i % 2 ? "semantic" : "channel"));
    CHECK(ra.round_end_losses == rb.round_end_losses);
    REQUIRE(ra.phases.size() == rb.phases.size());
    for (std::size_t i = 0; i < ra.phases.size(); ++i) CHECK(ra.phases[i].loss_trace == rb.phases[i].loss_trace);
    CHECK(digests(a) == digests(b));
  }

  TEST_CASE("a diverging channel phase aborts") {
    auto m = training::make_model(small_arch(), 32, 12);
    std::vector<Tensor> feats;
    for (const auto& img : images(12)) feats.push_back(codec::encoder_forward(m.codec, img.pixels, nullptr));
    auto cfg = quick_config();
    cfg.lr = 50.0;
    cfg.epochs = 5;
    CHECK(code_of([&] { training::train_channel_phase(feats, cfg, m); }) == ErrorCode::numeric);
  }

  TEST_CASE("ASC with mu 0 converges to a lossless mask") {
    auto m = trained_small_model();
    auto cfg = quick_config();
    cfg.asc_mu = 0.0;
    cfg.epochs = 6;
    cfg.lr = 5e-3;
    const auto r = training::train_asc(images(60), cfg, m);
    CAPTURE(r.aux_trace);
    CHECK(r.aux_trace.back() < 1e-3);
    CHECK(r.mask_ratio_trace.back() > r.mask_ratio_trace.front());
  }

  TEST_CASE("ASC with mu 0.05 keeps a partial mask and halves the path difference") {
    auto m = trained_small_model();
    const auto before = digests(m);
    auto cfg = quick_config();
    cfg.asc_mu = 0.05;
    cfg.epochs = 6;
    cfg.lr = 5e-3;
    nn::ParamSet extra("attention");
    extra.add("w", {2});
    const auto r = training::train_asc(images(60), cfg, m, {&extra});
    CAPTURE(r.aux_trace);
    CAPTURE(r.mask_ratio_trace);
    CHECK(r.mask_ratio_trace.back() > 0.0);
    CHECK(r.mask_ratio_trace.back() < 1.0);
    CHECK(r.aux_trace.back() < 0.5 * r.aux_trace.front());
    const auto after = digests(m);
    for (std::size_t i : {0, 1, 3, 4, 5}) CHECK(after[i] == before[i]);
    CHECK(after[2] != before[2]);
    CHECK(r.freeze.parameter_digests.count("attention") == 1);
  }

  TEST_CASE("ASC aborts when every mask collapses to zero") {
    auto m = trained_small_model();
    m.codec.mask_net.value("head.bias").fill(-50.0);
    auto cfg = quick_config();
    cfg.lr = 0.0;
    CHECK(code_of([&] { training::train_asc(images(12), cfg, m); }) == ErrorCode::numeric);
  }

  TEST_CASE("freeze verification detects a modified module") {
    nn::ParamSet ps("m");
    ps.add("w", {3});
    const auto fs = training::FreezeSet::capture({&ps});
    CHECK_NOTHROW(fs.verify({&ps}));
    ps.value("w")[0] = 1.0;
    CHECK(code_of([&] { fs.verify({&ps}); }) == ErrorCode::internal);
  }

  TEST_CASE("noiseless full-mask inference is deterministic and shape preserving") {
    const auto& m = trained_small_model();
    const auto imgs = images(12);
    channel::ChannelConfig cfg{channel::ChannelKind::awgn, 20.0, 1, 0.0};
    const auto a = training::run_sc(imgs[0], m, cfg, false), b = training::run_sc(imgs[0], m, cfg, false);
    CHECK(a.recovered.pixels.storage() == b.recovered.pixels.storage());
    CHECK(a.recovered.pixels.shape() == imgs[0].pixels.shape());
    CHECK(a.mask.retained_count == shape_numel(a.feature_shape));
    CHECK(training::end_to_end_loss(imgs, m, channel::ChannelKind::awgn, 10, 3) ==
          training::end_to_end_loss(imgs, m, channel::ChannelKind::awgn, 10, 3));
  }

  TEST_CASE("loss CSV round trip") {
    training::PhaseResult r;
    r.loss_trace = {0.1, 1.0 / 3.0, 2e-17};
    r.mask_ratio_trace = {0.5, 0.25, 0.125};
    const auto rows = training::trace_rows(r, "asc", 10, 10.0, 7);
    const std::string path = fixtures::scratch("trace") + "/loss.csv";
    training::write_trace_csv(path, rows);
    const auto back = training::read_trace_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].step == rows[i].step);
      CHECK(back[i].phase == rows[i].phase);
      CHECK(back[i].loss == rows[i].loss);
      CHECK(back[i].mask_ratio == rows[i].mask_ratio);
      CHECK(back[i].snr_db == rows[i].snr_db);
      CHECK(back[i].seed == rows[i].seed);
    }
    CHECK(fixtures::read_file(path).rfind(training::kTraceHeader, 0) == 0);
    fixtures::write_file(path, "bad header\n");
    CHECK_THROWS_AS(training::read_trace_csv(path), Error);
  }
}
