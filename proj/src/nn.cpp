// SPDX-License-Identifier: Apache-2.0
#include "lamsc/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "lamsc/error.hpp"
#include "lamsc/hash.hpp"

namespace lamsc::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using CMapRow = Eigen::Map<const Eigen::RowVectorXd>;

// Unfolds k x k patches of `x` (Hi x Wi x Ci) into rows; output is
// (Ho*Wo) x (k*k*Ci) with column order (ky, kx, c).
void im2col(const Tensor& x, int k, int pad, int ho, int wo, RowMat& cols) {
  const int hi = x.dim(0), wi = x.dim(1), ci = x.dim(2);
  cols.setZero(static_cast<Eigen::Index>(ho) * wo, static_cast<Eigen::Index>(k) * k * ci);
  const double* src = x.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* row = cols.data() + (static_cast<std::size_t>(oy) * wo + ox) * cols.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy + ky - pad;
        if (iy < 0 || iy >= hi) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox + kx - pad;
          if (ix < 0 || ix >= wi) continue;
          std::memcpy(row + (ky * k + kx) * ci, src + (static_cast<std::size_t>(iy) * wi + ix) * ci,
                      sizeof(double) * static_cast<std::size_t>(ci));
        }
      }
    }
  }
}

// Adjoint of im2col: scatters rows back into an Hi x Wi x Ci tensor.
void col2im(const RowMat& cols, int k, int pad, int ho, int wo, Tensor& x) {
  const int hi = x.dim(0), wi = x.dim(1), ci = x.dim(2);
  double* dst = x.data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const double* row = cols.data() + (static_cast<std::size_t>(oy) * wo + ox) * cols.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy + ky - pad;
        if (iy < 0 || iy >= hi) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox + kx - pad;
          if (ix < 0 || ix >= wi) continue;
          double* d = dst + (static_cast<std::size_t>(iy) * wi + ix) * ci;
          const double* s = row + (ky * k + kx) * ci;
          for (int c = 0; c < ci; ++c) d[c] += s[c];
        }
      }
    }
  }
}

void check_rank3(const Tensor& t, const char* what) {
  if (t.rank() != 3) fail(ErrorCode::shape_mismatch, std::string(what) + " must be HWC, got " + shape_str(t.shape()));
}

void check_kernel(const Tensor& w, const char* what) {
  if (w.rank() != 4 || w.dim(0) != w.dim(1))
    fail(ErrorCode::shape_mismatch, std::string(what) + " must be (k,k,a,b), got " + shape_str(w.shape()));
}

}  // namespace

// -- ParamSet -----------------------------------------------------------------

Param& ParamSet::add(const std::string& name, Shape shape) {
  if (contains(name)) fail(ErrorCode::internal, "duplicate parameter " + name);
  Tensor grad(shape);
  params_.push_back(Param{name, Tensor(std::move(shape)), std::move(grad)});
  return params_.back();
}

Param& ParamSet::get(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  fail(ErrorCode::internal, "unknown parameter " + name + " in module " + module_);
}

const Param& ParamSet::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  fail(ErrorCode::internal, "unknown parameter " + name + " in module " + module_);
}

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Param& p) { return p.name == name; });
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool ParamSet::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](const Param& p) { return p.value.all_finite(); });
}

std::string ParamSet::digest() const {
  Sha256 h;
  h.update(module_);
  for (const auto& p : params_) {
    h.update(p.name);
    h.update(shape_str(p.value.shape()));
    h.update(p.value.data(), p.value.size() * sizeof(double));
  }
  return h.hex_digest();
}

// -- init -----------------------------------------------------------------------

void init_he(Tensor& weight, std::mt19937_64& rng, double gain) {
  const int last = weight.dim(weight.rank() - 1);
  const double fan_in = static_cast<double>(weight.size()) / std::max(last, 1);
  std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / std::max(fan_in, 1.0)));
  for (auto& v : weight.values()) v = dist(rng);
}

void init_uniform(Tensor& t, std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = dist(rng);
}

// -- conv -------------------------------------------------------------------------

int conv_pad(Padding padding, int kernel) { return padding == Padding::same ? kernel / 2 : 0; }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  check_rank3(x, "conv2d input");
  check_kernel(w, "conv2d weight");
  const int k = w.dim(0), cin = w.dim(2), cout = w.dim(3);
  if (x.dim(2) != cin)
    fail(ErrorCode::shape_mismatch, "conv2d: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const int ho = x.dim(0) + 2 * pad - k + 1, wo = x.dim(1) + 2 * pad - k + 1;
  if (ho < 1 || wo < 1) fail(ErrorCode::shape_mismatch, "conv2d: input " + shape_str(x.shape()) + " smaller than kernel");
  RowMat cols;
  im2col(x, k, pad, ho, wo, cols);
  Tensor y({ho, wo, cout});
  MapMat ym(y.data(), static_cast<Eigen::Index>(ho) * wo, cout);
  ym.noalias() = cols * CMapMat(w.data(), static_cast<Eigen::Index>(k) * k * cin, cout);
  ym.rowwise() += CMapRow(b.data(), cout);
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, int pad, const Tensor& dy,
                     Tensor* dx, Tensor& dw, Tensor& db) {
  const int k = w.dim(0), cin = w.dim(2), cout = w.dim(3);
  const int ho = dy.dim(0), wo = dy.dim(1);
  RowMat cols;
  im2col(x, k, pad, ho, wo, cols);
  CMapMat dym(dy.data(), static_cast<Eigen::Index>(ho) * wo, cout);
  MapMat dwm(dw.data(), static_cast<Eigen::Index>(k) * k * cin, cout);
  dwm.noalias() += cols.transpose() * dym;
  Eigen::Map<Eigen::RowVectorXd>(db.data(), cout) += dym.colwise().sum();
  if (dx) {
    RowMat dcols = dym * CMapMat(w.data(), static_cast<Eigen::Index>(k) * k * cin, cout).transpose();
    *dx = Tensor(x.shape());
    col2im(dcols, k, pad, ho, wo, *dx);
  }
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  check_rank3(x, "conv_transpose2d input");
  check_kernel(w, "conv_transpose2d weight");
  const int k = w.dim(0), cout = w.dim(2), cin = w.dim(3);
  if (x.dim(2) != cin)
    fail(ErrorCode::shape_mismatch,
         "conv_transpose2d: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const int h = x.dim(0), wd = x.dim(1);
  const int ho = h + k - 1 - 2 * pad, wo = wd + k - 1 - 2 * pad;
  if (ho < 1 || wo < 1) fail(ErrorCode::shape_mismatch, "conv_transpose2d: degenerate output size");
  CMapMat xm(x.data(), static_cast<Eigen::Index>(h) * wd, cin);
  RowMat dcols = xm * CMapMat(w.data(), static_cast<Eigen::Index>(k) * k * cout, cin).transpose();
  Tensor y({ho, wo, cout});
  col2im(dcols, k, pad, h, wd, y);
  MapMat(y.data(), static_cast<Eigen::Index>(ho) * wo, cout).rowwise() += CMapRow(b.data(), cout);
  return y;
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& w, int pad, const Tensor& dy,
                               Tensor* dx, Tensor& dw, Tensor& db) {
  const int k = w.dim(0), cout = w.dim(2), cin = w.dim(3);
  const int h = x.dim(0), wd = x.dim(1);
  RowMat cols;
  im2col(dy, k, pad, h, wd, cols);
  CMapMat xm(x.data(), static_cast<Eigen::Index>(h) * wd, cin);
  MapMat(dw.data(), static_cast<Eigen::Index>(k) * k * cout, cin).noalias() += cols.transpose() * xm;
  CMapMat dym(dy.data(), static_cast<Eigen::Index>(dy.dim(0)) * dy.dim(1), cout);
  Eigen::Map<Eigen::RowVectorXd>(db.data(), cout) += dym.colwise().sum();
  if (dx) {
    *dx = Tensor(x.shape());
    MapMat(dx->data(), static_cast<Eigen::Index>(h) * wd, cin).noalias() =
        cols * CMapMat(w.data(), static_cast<Eigen::Index>(k) * k * cout, cin);
  }
}

// -- pooling / resize ---------------------------------------------------------------

Tensor maxpool2d(const Tensor& x, int size, PoolCache* cache) {
  check_rank3(x, "maxpool input");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int ho = h / size, wo = w / size;
  if (ho < 1 || wo < 1) fail(ErrorCode::shape_mismatch, "maxpool: input " + shape_str(x.shape()) + " smaller than window");
  Tensor y({ho, wo, c});
  if (cache) {
    cache->argmax.assign(y.size(), 0);
    cache->input_shape = x.shape();
  }
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox)
      for (int ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (int dy = 0; dy < size; ++dy)
          for (int dx = 0; dx < size; ++dx) {
            const std::size_t i = (static_cast<std::size_t>(oy * size + dy) * w + (ox * size + dx)) * c + ch;
            if (x[i] > best) {
              best = x[i];
              best_i = i;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(oy) * wo + ox) * c + ch;
        y[o] = best;
        if (cache) cache->argmax[o] = best_i;
      }
  return y;
}

Tensor maxpool2d_backward(const PoolCache& cache, const Tensor& dy) {
  Tensor dx(cache.input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[cache.argmax[o]] += dy[o];
  return dx;
}

Tensor resize_nearest(const Tensor& x, int out_h, int out_w) {
  check_rank3(x, "resize input");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({out_h, out_w, c});
  for (int oy = 0; oy < out_h; ++oy) {
    const int sy = static_cast<int>(static_cast<long>(oy) * h / out_h);
    for (int ox = 0; ox < out_w; ++ox) {
      const int sx = static_cast<int>(static_cast<long>(ox) * w / out_w);
      std::memcpy(&y.at(oy, ox, 0), x.data() + (static_cast<std::size_t>(sy) * w + sx) * c,
                  sizeof(double) * static_cast<std::size_t>(c));
    }
  }
  return y;
}

Tensor resize_nearest_backward(const Tensor& dy, const Shape& input_shape) {
  Tensor dx(input_shape);
  const int h = input_shape[0], w = input_shape[1], c = input_shape[2];
  const int out_h = dy.dim(0), out_w = dy.dim(1);
  for (int oy = 0; oy < out_h; ++oy) {
    const int sy = static_cast<int>(static_cast<long>(oy) * h / out_h);
    for (int ox = 0; ox < out_w; ++ox) {
      const int sx = static_cast<int>(static_cast<long>(ox) * w / out_w);
      for (int ch = 0; ch < c; ++ch) dx.at(sy, sx, ch) += dy.at(oy, ox, ch);
    }
  }
  return dx;
}

void relu_inplace(Tensor& x) {
  for (auto& v : x.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (y[i] <= 0.0) dy[i] = 0.0;
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -- Adam -------------------------------------------------------------------------------

Adam::Adam(ParamSet& params, AdamConfig config) : params_(&params), config_(config) {
  for (const auto& p : params.params()) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::step(double grad_scale) {
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  auto& ps = params_->params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = ps[i];
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j] * grad_scale;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      p.value[j] -= config_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config_.eps);
    }
    p.grad.fill(0.0);
  }
}

// -- misc ------------------------------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    fail(ErrorCode::shape_mismatch, "mse: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace lamsc::nn
