// SPDX-License-Identifier: Apache-2.0
#include "lamsc/channel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lamsc/error.hpp"

namespace lamsc::channel {

double SymbolVector::power() const {
  if (symbols.empty()) return 0.0;
  double s = 0.0;
  for (double v : symbols) s += v * v;
  return s / static_cast<double>(symbols.size());
}

ChannelKind parse_kind(std::string_view name) {
  if (name == "awgn") return ChannelKind::awgn;
  if (name == "rayleigh") return ChannelKind::rayleigh;
  fail(ErrorCode::config, "unknown channel kind '" + std::string(name) + "' (expected awgn or rayleigh)");
}

std::string to_string(ChannelKind kind) { return kind == ChannelKind::awgn ? "awgn" : "rayleigh"; }

ChannelCodec::ChannelCodec(int feature_width, int hidden, std::uint64_t seed)
    : feature_width_(feature_width), hidden_(hidden) {
  if (feature_width < 1 || hidden < 1) fail(ErrorCode::config, "channel codec widths must be positive");
  std::mt19937_64 rng(seed);
  for (auto* ps : {&encoder, &decoder}) {
    nn::init_he(ps->add("fc1.weight", {1, 1, feature_width, hidden}).value, rng);
    ps->add("fc1.bias", {hidden});
    nn::init_he(ps->add("fc2.weight", {1, 1, hidden, feature_width}).value, rng, 0.7);
    ps->add("fc2.bias", {feature_width});
  }
}

namespace {

void check_width(const ChannelCodec& codec, const Tensor& t, const char* what) {
  if (t.rank() != 3 || t.dim(2) != codec.feature_width())
    fail(ErrorCode::shape_mismatch, std::string(what) + " must be h x w x " + std::to_string(codec.feature_width()) +
                                        ", got " + shape_str(t.shape()));
}

void mlp_backward(nn::ParamSet& ps, const Tensor& input, const Tensor& hidden, const Tensor& dout, Tensor* dinput,
                  bool accumulate) {
  Tensor sw2, sb2, sw1, sb1;
  Tensor* gw2 = &ps.grad("fc2.weight");
  Tensor* gb2 = &ps.grad("fc2.bias");
  Tensor* gw1 = &ps.grad("fc1.weight");
  Tensor* gb1 = &ps.grad("fc1.bias");
  if (!accumulate) {
    sw2 = Tensor(gw2->shape());
    sb2 = Tensor(gb2->shape());
    sw1 = Tensor(gw1->shape());
    sb1 = Tensor(gb1->shape());
    gw2 = &sw2;
    gb2 = &sb2;
    gw1 = &sw1;
    gb1 = &sb1;
  }
  Tensor dh;
  nn::conv2d_backward(hidden, ps.value("fc2.weight"), 0, dout, &dh, *gw2, *gb2);
  nn::relu_backward_inplace(hidden, dh);
  nn::conv2d_backward(input, ps.value("fc1.weight"), 0, dh, dinput, *gw1, *gb1);
}

}  // namespace

Tensor channel_encoder_forward(const ChannelCodec& codec, const Tensor& features, EncodeCache* cache) {
  check_width(codec, features, "channel encoder input");
  if (!features.all_finite()) fail(ErrorCode::numeric, "channel encoder input contains non-finite values");
  Tensor h = nn::conv2d(features, codec.encoder.value("fc1.weight"), codec.encoder.value("fc1.bias"), 0);
  nn::relu_inplace(h);
  Tensor z = nn::conv2d(h, codec.encoder.value("fc2.weight"), codec.encoder.value("fc2.bias"), 0);
  double energy = 0.0;
  for (double v : z.values()) energy += v * v;
  if (!(energy > 0.0) || !std::isfinite(energy))
    fail(ErrorCode::numeric, "channel encoder output is all zero (or non-finite): power normalisation is undefined");
  const double scale = std::sqrt(static_cast<double>(z.size()) / energy);
  Tensor x = z;
  for (auto& v : x.values()) v *= scale;
  if (cache) {
    cache->features = features;
    cache->hidden = std::move(h);
    cache->raw = std::move(z);
    cache->scale = scale;
    cache->symbols = x;
  }
  return x;
}

void channel_encoder_backward(ChannelCodec& codec, const EncodeCache& cache, const Tensor& dsymbols, Tensor* dfeatures,
                              bool accumulate_params) {
  // x = s z with s = sqrt(N)/|z|:  dz = s (dx - x (x.dx)/N).
  const double n = static_cast<double>(cache.symbols.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < dsymbols.size(); ++i) dot += cache.symbols[i] * dsymbols[i];
  Tensor dz(dsymbols.shape());
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = cache.scale * (dsymbols[i] - cache.symbols[i] * dot / n);
  mlp_backward(codec.encoder, cache.features, cache.hidden, dz, dfeatures, accumulate_params);
}

Tensor channel_decoder_forward(const ChannelCodec& codec, const Tensor& received, DecodeCache* cache) {
  check_width(codec, received, "channel decoder input");
  Tensor h = nn::conv2d(received, codec.decoder.value("fc1.weight"), codec.decoder.value("fc1.bias"), 0);
  nn::relu_inplace(h);
  Tensor out = nn::conv2d(h, codec.decoder.value("fc2.weight"), codec.decoder.value("fc2.bias"), 0);
  if (cache) {
    cache->received = received;
    cache->hidden = std::move(h);
  }
  return out;
}

void channel_decoder_backward(ChannelCodec& codec, const DecodeCache& cache, const Tensor& dout, Tensor* dreceived,
                              bool accumulate_params) {
  mlp_backward(codec.decoder, cache.received, cache.hidden, dout, dreceived, accumulate_params);
}

// -- operations ---------------------------------------------------------------------------

SymbolVector channel_encode(const codec::FeatureTensor& features, const ChannelCodec& codec) {
  Tensor x = channel_encoder_forward(codec, features.data, nullptr);
  return SymbolVector{std::vector<double>(x.storage().begin(), x.storage().end())};
}

double noise_variance(double snr_db, double signal_power) {
  if (!(signal_power > 0.0)) fail(ErrorCode::invalid_argument, "signal power must be positive");
  if (std::isnan(snr_db)) fail(ErrorCode::invalid_argument, "SNR must not be NaN");
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

double transmit_inplace(std::span<double> symbols, const ChannelConfig& config) {
  if (symbols.empty()) fail(ErrorCode::invalid_argument, "cannot transmit an empty symbol vector");
  double power = 0.0;
  for (double v : symbols) power += v * v;
  power /= static_cast<double>(symbols.size());
  const double var = config.noise_variance_override ? *config.noise_variance_override : noise_variance(config.snr_db, power);
  if (!(var >= 0.0) || !std::isfinite(var)) fail(ErrorCode::invalid_argument, "noise variance must be finite and >= 0");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = std::sqrt(var);
  switch (config.kind) {
    case ChannelKind::awgn:
      if (sigma > 0.0)
        for (auto& v : symbols) v += sigma * gauss(rng);
      return 1.0;
    case ChannelKind::rayleigh: {
      // h = |a + ib| with a, b ~ N(0, 1/2); equalised with perfect CSI.
      const double a = gauss(rng) * std::sqrt(0.5), b = gauss(rng) * std::sqrt(0.5);
      const double h = std::max(std::hypot(a, b), 1e-12);
      if (sigma > 0.0)
        for (auto& v : symbols) v = (h * v + sigma * gauss(rng)) / h;
      return h;
    }
  }
  fail(ErrorCode::invalid_argument, "unknown channel kind");
}

SymbolVector transmit(const SymbolVector& symbols, const ChannelConfig& config) {
  SymbolVector out = symbols;
  transmit_inplace(out.symbols, config);
  return out;
}

codec::FeatureTensor channel_decode(const SymbolVector& symbols, const ChannelCodec& codec, const Shape& feature_shape,
                                    const std::array<int, 3>& source_shape) {
  if (shape_numel(feature_shape) != symbols.symbols.size())
    fail(ErrorCode::shape_mismatch, "channel_decode: " + std::to_string(symbols.symbols.size()) +
                                        " symbols cannot fill feature shape " + shape_str(feature_shape));
  Tensor received(feature_shape);
  received.storage().assign(symbols.symbols.begin(), symbols.symbols.end());
  codec::FeatureTensor out;
  out.data = channel_decoder_forward(codec, received, nullptr);
  out.source_shape = source_shape;
  return out;
}

// -- mutual information ------------------------------------------------------------------

MIEstimatorParams make_mi_params(int x_dim, int y_dim, std::uint64_t seed, int hidden) {
  if (x_dim < 1 || y_dim < 1 || hidden < 1) fail(ErrorCode::config, "MI estimator dimensions must be positive");
  MIEstimatorParams p;
  p.input_dim = x_dim + y_dim;
  p.hidden = hidden;
  std::mt19937_64 rng(seed);
  nn::init_he(p.net.add("fc1.weight", {p.input_dim, hidden}).value, rng);
  p.net.add("fc1.bias", {hidden});
  nn::init_he(p.net.add("fc2.weight", {hidden, 1}).value, rng, 0.5);
  p.net.add("fc2.bias", {1});
  return p;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;

}  // namespace

double dv_bound(MIEstimatorParams& params, const MiBatch& batch, const std::vector<std::size_t>& perm,
                double param_scale, Tensor* dx, Tensor* dy) {
  const auto n = static_cast<Eigen::Index>(batch.x.dim(0));
  const int dxn = batch.x.dim(1), dyn = batch.y.dim(1);
  if (batch.y.dim(0) != n || dxn + dyn != params.input_dim || perm.size() != static_cast<std::size_t>(n))
    fail(ErrorCode::shape_mismatch, "MI batch shapes do not match the statistics network");
  const CMap w1(params.net.value("fc1.weight").data(), params.input_dim, params.hidden);
  const Eigen::Map<const Eigen::RowVectorXd> b1(params.net.value("fc1.bias").data(), params.hidden);
  const Eigen::Map<const Eigen::VectorXd> w2(params.net.value("fc2.weight").data(), params.hidden);
  const double b2 = params.net.value("fc2.bias")[0];
  const CMap xm(batch.x.data(), n, dxn), ym(batch.y.data(), n, dyn);

  RowMat joint(n, params.input_dim), marg(n, params.input_dim);
  joint.leftCols(dxn) = xm;
  joint.rightCols(dyn) = ym;
  marg.leftCols(dxn) = xm;
  for (Eigen::Index i = 0; i < n; ++i) marg.row(i).tail(dyn) = ym.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));

  RowMat hj = (joint * w1).rowwise() + b1;
  RowMat hm = (marg * w1).rowwise() + b1;
  hj = hj.cwiseMax(0.0);
  hm = hm.cwiseMax(0.0);
  Eigen::VectorXd tj = (hj * w2).array() + b2;
  Eigen::VectorXd tm = (hm * w2).array() + b2;
  const double tmax = tm.maxCoeff();
  const Eigen::VectorXd e = (tm.array() - tmax).exp();
  const double se = e.sum();
  const double bound = tj.mean() - (tmax + std::log(se / static_cast<double>(n)));
  if (!std::isfinite(bound))
    fail(ErrorCode::numeric, "mutual-information bound is non-finite; reduce the estimator learning rate");

  if (param_scale == 0.0 && !dx && !dy) return bound;
  // dJ/dT_joint = 1/n, dJ/dT_marg = -softmax(T_marg).
  const Eigen::VectorXd gj = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const Eigen::VectorXd gm = -e / se;
  RowMat dhj = gj * w2.transpose();
  RowMat dhm = gm * w2.transpose();
  dhj = (hj.array() > 0.0).select(dhj, 0.0);
  dhm = (hm.array() > 0.0).select(dhm, 0.0);
  if (param_scale != 0.0) {
    Eigen::Map<RowMat>(params.net.grad("fc1.weight").data(), params.input_dim, params.hidden) +=
        param_scale * (joint.transpose() * dhj + marg.transpose() * dhm);
    Eigen::Map<Eigen::RowVectorXd>(params.net.grad("fc1.bias").data(), params.hidden) +=
        param_scale * (dhj.colwise().sum() + dhm.colwise().sum());
    Eigen::Map<Eigen::VectorXd>(params.net.grad("fc2.weight").data(), params.hidden) +=
        param_scale * (hj.transpose() * gj + hm.transpose() * gm);
    params.net.grad("fc2.bias")[0] += param_scale * (gj.sum() + gm.sum());
  }
  if (dx || dy) {
    const RowMat dj = dhj * w1.transpose();
    const RowMat dm = dhm * w1.transpose();
    if (dx) {
      *dx = Tensor(batch.x.shape());
      Eigen::Map<RowMat>(dx->data(), n, dxn) = dj.leftCols(dxn) + dm.leftCols(dxn);
    }
    if (dy) {
      *dy = Tensor(batch.y.shape());
      Eigen::Map<RowMat> dym(dy->data(), n, dyn);
      dym = dj.rightCols(dyn);
      for (Eigen::Index i = 0; i < n; ++i)
        dym.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)])) += dm.row(i).tail(dyn);
    }
  }
  return bound;
}

double estimate_mi(const Tensor& x, const Tensor& y, MIEstimatorParams& params, int steps, const MiOptions& options) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0))
    fail(ErrorCode::shape_mismatch, "estimate_mi: x and y must be n x d with equal n");
  if (x.dim(0) < 64) fail(ErrorCode::precondition, "estimate_mi needs at least 64 samples");
  if (steps < 0) fail(ErrorCode::invalid_argument, "steps must be >= 0");
  const std::size_t n = static_cast<std::size_t>(x.dim(0));
  const std::size_t mb = options.minibatch == 0 || options.minibatch > n ? n : options.minibatch;
  std::mt19937_64 rng(options.seed);
  params.net.zero_grad();
  nn::Adam adam(params.net, nn::AdamConfig{options.lr});
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Tensor bx({static_cast<int>(mb), x.dim(1)}), by({static_cast<int>(mb), y.dim(1)});
  std::vector<std::size_t> perm(mb);
  for (int step = 0; step < steps; ++step) {
    if (mb < n) std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < mb; ++i) {
      std::copy_n(x.data() + idx[i] * static_cast<std::size_t>(x.dim(1)), x.dim(1), bx.data() + i * static_cast<std::size_t>(x.dim(1)));
      std::copy_n(y.data() + idx[i] * static_cast<std::size_t>(y.dim(1)), y.dim(1), by.data() + i * static_cast<std::size_t>(y.dim(1)));
    }
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // Ascent on J == descent on -J.
    dv_bound(params, MiBatch{bx, by}, perm, -1.0, nullptr, nullptr);
    adam.step();
    if (!params.net.all_finite())
      fail(ErrorCode::numeric, "MI estimator parameters diverged; reduce the estimator learning rate");
  }
  std::vector<std::size_t> full(n);
  double total = 0.0;
  for (int s = 0; s < std::max(1, options.eval_shuffles); ++s) {
    std::iota(full.begin(), full.end(), 0);
    std::shuffle(full.begin(), full.end(), rng);
    total += dv_bound(params, MiBatch{x, y}, full, 0.0, nullptr, nullptr);
  }
  return total / std::max(1, options.eval_shuffles);
}

}  // namespace lamsc::channel
