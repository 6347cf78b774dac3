// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "fixtures.hpp"
#include "lamsc/checkpoint.hpp"
#include "lamsc/error.hpp"
#include "lamsc/training.hpp"
#include "oracles.hpp"

using namespace lamsc;

namespace {

nn::ParamSet toy(const std::string& module, std::uint64_t seed, int width = 3) {
  nn::ParamSet ps(module);
  oracle::randomize(ps.add("w", {2, width}).value, seed);
  oracle::randomize(ps.add("b", {width}).value, seed + 1);
  return ps;
}

ErrorCode load_code(const ckpt::Checkpoint& c, nn::ParamSet& ps) {
  try {
    ckpt::load_params(c, ps);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("save and load round trip bit-exactly") {
    const auto model = training::make_model(codec::CodecArch{}, 128, 9);
    ckpt::Checkpoint c;
    c.config_digest = "feed";
    c.metadata_json = R"({"phase":"crossed"})";
    for (const auto* ps : {&model.codec.encoder, &model.codec.decoder, &model.channel.encoder, &model.channel.decoder})
      ckpt::add_params(c, *ps);
    const std::string path = fixtures::scratch("ckpt") + "/m.ckpt";
    ckpt::save_checkpoint(path, c);
    const auto back = ckpt::load_checkpoint(path);
    CHECK(back.config_digest == "feed");
    CHECK(back.metadata_json == c.metadata_json);
    CHECK(back.has_module("codec.encoder"));
    CHECK_FALSE(back.has_module("codec.mask_net"));

    auto other = training::make_model(codec::CodecArch{}, 128, 10);
    CHECK(other.codec.encoder.digest() != model.codec.encoder.digest());
    ckpt::load_params(back, other.codec.encoder);
    ckpt::load_params(back, other.channel.decoder);
    CHECK(other.codec.encoder.digest() == model.codec.encoder.digest());
    CHECK(other.channel.decoder.digest() == model.channel.decoder.digest());
    CHECK(load_code(back, other.codec.mask_net) == ErrorCode::missing_artifact);
  }

  TEST_CASE("shape disagreement is a shape mismatch") {
    ckpt::Checkpoint c;
    ckpt::add_params(c, toy("m", 1, 3));
    auto wider = toy("m", 2, 4);
    CHECK(load_code(c, wider) == ErrorCode::shape_mismatch);
    auto same = toy("m", 3, 3);
    ckpt::load_params(c, same);
    CHECK(same.digest() == toy("m", 1, 3).digest());
  }

  TEST_CASE("damaged or missing files fail with io errors") {
    const std::string dir = fixtures::scratch("ckpt_bad");
    CHECK_THROWS_AS(ckpt::load_checkpoint(dir + "/absent.ckpt"), Error);
    fixtures::write_file(dir + "/bad.ckpt", "NOTACKPT0000");
    CHECK_THROWS_AS(ckpt::load_checkpoint(dir + "/bad.ckpt"), Error);
    ckpt::Checkpoint c;
    ckpt::add_params(c, toy("m", 1));
    ckpt::save_checkpoint(dir + "/ok.ckpt", c);
    const std::string bytes = fixtures::read_file(dir + "/ok.ckpt");
    fixtures::write_file(dir + "/short.ckpt", bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(ckpt::load_checkpoint(dir + "/short.ckpt"), Error);
  }
}
