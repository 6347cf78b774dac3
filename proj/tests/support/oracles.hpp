// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. They are
// written as plain loops, without sharing code with the library kernels.
#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lamsc/image.hpp"
#include "lamsc/skb.hpp"
#include "lamsc/tensor.hpp"

namespace oracle {

using lamsc::Tensor;

// Zero-padded stride-1 convolution; w is (k, k, cin, cout).
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2), k = w.dim(0), cout = w.dim(3);
  const int oh = h + 2 * pad - k + 1, ow = wd + 2 * pad - k + 1;
  Tensor y({oh, ow, cout});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int co = 0; co < cout; ++co) {
        double s = b[static_cast<std::size_t>(co)];
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int iy = oy + ky - pad, ix = ox + kx - pad;
            if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
            for (int ci = 0; ci < cin; ++ci)
              s += x.at(iy, ix, ci) * w[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co];
          }
        y.at(oy, ox, co) = s;
      }
  return y;
}

inline Tensor maxpool(const Tensor& x, int s) {
  const int oh = x.dim(0) / s, ow = x.dim(1) / s, c = x.dim(2);
  Tensor y({oh, ow, c});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int ch = 0; ch < c; ++ch) {
        double m = -INFINITY;
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx) m = std::max(m, x.at(oy * s + dy, ox * s + dx, ch));
        y.at(oy, ox, ch) = m;
      }
  return y;
}

inline void relu(Tensor& t) {
  for (auto& v : t.values()) v = v > 0 ? v : 0;
}

inline double psnr(const lamsc::ImageSample& a, const lamsc::ImageSample& b) {
  long double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const long double d = static_cast<long double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  const double mse = static_cast<double>(se / a.pixels.size());
  if (mse < 1e-10) return 100.0;
  return -10.0 * std::log10(mse);
}

// Direct 2-D Gaussian window at every valid position.
inline double ssim(const lamsc::ImageSample& a, const lamsc::ImageSample& b) {
  const int n = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[11][11], total = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
  for (auto& row : g)
    for (double& v : row) v /= total;
  const int h = a.height(), w = a.width(), c = a.channels();
  double acc = 0;
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0;
    int count = 0;
    for (int y = 0; y + n <= h; ++y)
      for (int x = 0; x + n <= w; ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            ma += g[i][j] * a.pixels.at(y + i, x + j, ch);
            mb += g[i][j] * b.pixels.at(y + i, x + j, ch);
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double da = a.pixels.at(y + i, x + j, ch) - ma, db = b.pixels.at(y + i, x + j, ch) - mb;
            va += g[i][j] * da * da;
            vb += g[i][j] * db * db;
            cov += g[i][j] * da * db;
          }
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    acc += sum / count;
  }
  return acc / c;
}

inline double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Raw 8-bit indices of a palette or gray PNG, read straight through libpng.
inline std::vector<std::uint8_t> read_png_indices(const std::string& path, int& height, int& width) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) return {};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return {};
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  out.resize(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = out.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

inline lamsc::ImageSample random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  lamsc::ImageSample img = lamsc::make_image(h, w, c);
  for (auto& v : img.pixels.values()) v = u(rng);
  return img;
}

inline void randomize(Tensor& t, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t.values()) v = n(rng);
}

// Central difference of f with respect to v.
inline double central_diff(const std::function<double()>& f, double& v, double h = 1e-4) {
  const double saved = v;
  v = saved + h;
  const double fp = f();
  v = saved - h;
  const double fm = f();
  v = saved;
  return (fp - fm) / (2 * h);
}

// Relative agreement with a small absolute floor for entries near zero.
inline bool grad_close(double analytic, double numeric, double rel = 1e-3, double abs_floor = 1e-6) {
  return std::abs(analytic - numeric) <= rel * std::max(std::abs(analytic), std::abs(numeric)) + abs_floor;
}

}  // namespace oracle
