// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "lamsc/error.hpp"
#include "lamsc/hash.hpp"
#include "lamsc/nn.hpp"
#include "oracles.hpp"

using namespace lamsc;

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d matches the loop oracle for same and valid padding") {
    for (int pad : {0, 1, 2}) {
      Tensor x({7, 6, 3}), w({3, 3, 3, 5}), b({5});
      oracle::randomize(x, 1 + pad);
      oracle::randomize(w, 2 + pad);
      oracle::randomize(b, 3 + pad);
      const Tensor y = nn::conv2d(x, w, b, pad);
      CHECK(max_abs_diff(y, oracle::conv2d(x, w, b, pad)) < 1e-12);
    }
  }

  TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
    for (int pad : {0, 1}) {
      Tensor w({3, 3, 4, 2}), zero2({2}), zero4({4});
      oracle::randomize(w, 7);
      Tensor u({6, 5, 4});
      oracle::randomize(u, 8);
      const Tensor cu = nn::conv2d(u, w, zero2, pad);
      Tensor v(cu.shape());
      oracle::randomize(v, 9);
      const Tensor tv = nn::conv_transpose2d(v, w, zero4, pad);
      REQUIRE(tv.shape() == u.shape());
      CHECK(dot(cu, v) == doctest::Approx(dot(u, tv)).epsilon(1e-12));
    }
  }

  TEST_CASE("conv2d backward equals finite differences") {
    Tensor x({5, 5, 2}), w({3, 3, 2, 3}), b({3}), g({5, 5, 3});
    oracle::randomize(x, 1);
    oracle::randomize(w, 2);
    oracle::randomize(b, 3);
    oracle::randomize(g, 4);
    auto loss = [&] { return dot(nn::conv2d(x, w, b, 1), g); };
    Tensor dx, dw(w.shape()), db(b.shape());
    nn::conv2d_backward(x, w, 1, g, &dx, dw, db);
    for (std::size_t i = 0; i < x.size(); i += 3) CHECK(oracle::grad_close(dx[i], oracle::central_diff(loss, x[i])));
    for (std::size_t i = 0; i < w.size(); i += 5) CHECK(oracle::grad_close(dw[i], oracle::central_diff(loss, w[i])));
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(oracle::grad_close(db[i], oracle::central_diff(loss, b[i])));
  }

  TEST_CASE("maxpool matches the oracle and routes gradients to the argmax") {
    Tensor x({6, 6, 2});
    oracle::randomize(x, 5);
    nn::PoolCache cache;
    const Tensor y = nn::maxpool2d(x, 2, &cache);
    CHECK(max_abs_diff(y, oracle::maxpool(x, 2)) == 0.0);
    Tensor dy(y.shape(), 1.0);
    const Tensor dx = nn::maxpool2d_backward(cache, dy);
    double total = 0;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      total += dx[i];
      if (dx[i] != 0.0) {
        bool is_max = false;
        for (std::size_t j = 0; j < y.size(); ++j) is_max |= y[j] == x[i];
        CHECK(is_max);
      }
    }
    CHECK(total == doctest::Approx(static_cast<double>(y.size())));
  }

  TEST_CASE("floor pooling drops the trailing rows") {
    Tensor x({7, 7, 1});
    oracle::randomize(x, 6);
    const Tensor y = nn::maxpool2d(x, 3, nullptr);
    CHECK(y.shape() == Shape{2, 2, 1});
    CHECK(max_abs_diff(y, oracle::maxpool(x, 3)) == 0.0);
  }

  TEST_CASE("nearest resize backward is the adjoint of the forward") {
    Tensor x({3, 4, 2});
    oracle::randomize(x, 1);
    const Tensor y = nn::resize_nearest(x, 7, 9);
    Tensor g(y.shape());
    oracle::randomize(g, 2);
    CHECK(dot(y, g) == doctest::Approx(dot(x, nn::resize_nearest_backward(g, x.shape()))).epsilon(1e-12));
  }

  TEST_CASE("adam's first step moves each parameter by lr against the gradient sign") {
    nn::ParamSet ps("t");
    auto& p = ps.add("w", {3});
    p.value[0] = 1.0;
    p.grad[0] = 2.0;
    p.grad[1] = -0.5;
    nn::Adam adam(ps, nn::AdamConfig{0.1});
    adam.step();
    CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(p.value[1] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(p.value[2] == 0.0);
    CHECK(p.grad[0] == 0.0);
  }

  TEST_CASE("adam with lr 0 leaves parameters bitwise unchanged") {
    nn::ParamSet ps("t");
    auto& p = ps.add("w", {4});
    oracle::randomize(p.value, 3);
    const std::string before = ps.digest();
    oracle::randomize(p.grad, 4);
    nn::Adam adam(ps, nn::AdamConfig{0.0});
    adam.step();
    CHECK(ps.digest() == before);
  }

  TEST_CASE("derive_seed is deterministic and separates streams") {
    CHECK(nn::derive_seed(1, 2, 3) == nn::derive_seed(1, 2, 3));
    CHECK(nn::derive_seed(1, 2, 3) != nn::derive_seed(1, 3, 2));
    CHECK(nn::derive_seed(1, 2) != nn::derive_seed(2, 2));
  }

  TEST_CASE("sha256 known answer and parameter digests") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    nn::ParamSet ps("m");
    ps.add("a", {2});
    const std::string d0 = ps.digest();
    ps.value("a")[1] = 1e-300;
    CHECK(ps.digest() != d0);
  }

  TEST_CASE("parameter sets reject duplicates and unknown names") {
    nn::ParamSet ps("m");
    ps.add("a", {1});
    CHECK_THROWS_AS(ps.add("a", {1}), Error);
    CHECK_THROWS_AS(ps.get("b"), Error);
  }
}
