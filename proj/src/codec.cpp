// SPDX-License-Identifier: Apache-2.0
#include "lamsc/codec.hpp"

#include <algorithm>
#include <random>

#include "lamsc/error.hpp"

namespace lamsc::codec {

namespace {

constexpr int kMaskKernel = 3;

int pool_out(const CodecArch& arch, int in, const char* stage) {
  if (in < arch.pool)
    fail(ErrorCode::shape_mismatch, std::string("indivisible dimensions: ") + stage + " size " + std::to_string(in) +
                                        " is smaller than the pooling window");
  if (!arch.pool_floor && in % arch.pool != 0)
    fail(ErrorCode::shape_mismatch, std::string("indivisible dimensions: ") + stage + " size " + std::to_string(in) +
                                        " is not divisible by the pooling window " + std::to_string(arch.pool));
  return in / arch.pool;
}

int conv_out(const CodecArch& arch, int in) {
  const int out = in + 2 * nn::conv_pad(arch.padding, arch.kernel) - arch.kernel + 1;
  if (out < 1) fail(ErrorCode::shape_mismatch, "input too small for the encoder kernel");
  return out;
}

}  // namespace

StageSizes stage_sizes(const CodecArch& arch, int input) {
  StageSizes s{};
  s.input = input;
  s.conv1 = conv_out(arch, input);
  s.pool1 = pool_out(arch, s.conv1, "first pooling input");
  s.conv2 = conv_out(arch, s.pool1);
  s.features = pool_out(arch, s.conv2, "second pooling input");
  return s;
}

CodecParams::CodecParams(CodecArch arch, std::uint64_t seed) : arch_(arch) {
  if (arch.channels < 1 || arch.width1 < 1 || arch.width2 < 1 || arch.kernel < 1 || arch.pool < 1 ||
      arch.mask_hidden < 1)
    fail(ErrorCode::config, "codec architecture sizes must be positive");
  std::mt19937_64 rng(seed);
  const int k = arch.kernel;
  nn::init_he(encoder.add("conv1.weight", {k, k, arch.channels, arch.width1}).value, rng);
  encoder.add("conv1.bias", {arch.width1});
  nn::init_he(encoder.add("conv2.weight", {k, k, arch.width1, arch.width2}).value, rng);
  encoder.add("conv2.bias", {arch.width2});

  nn::init_he(decoder.add("deconv1.weight", {k, k, arch.width1, arch.width2}).value, rng);
  decoder.add("deconv1.bias", {arch.width1});
  nn::init_he(decoder.add("deconv2.weight", {k, k, arch.channels, arch.width1}).value, rng, 0.5);
  decoder.add("deconv2.bias", {arch.channels});

  const int m = arch.mask_hidden, f = arch.width2;
  nn::init_he(mask_net.add("conv1.weight", {kMaskKernel, kMaskKernel, f, m}).value, rng);
  mask_net.add("conv1.bias", {m});
  nn::init_he(mask_net.add("conv2.weight", {kMaskKernel, kMaskKernel, m, m}).value, rng);
  mask_net.add("conv2.bias", {m});
  nn::init_he(mask_net.add("head.weight", {1, 1, m, f}).value, rng, 0.1);
  mask_net.add("head.bias", {f}).value.fill(0.0);
}

Shape CodecParams::feature_shape(int height, int width) const {
  return {stage_sizes(arch_, height).features, stage_sizes(arch_, width).features, arch_.width2};
}

// -- encoder ---------------------------------------------------------------------

Tensor encoder_forward(const CodecParams& params, const Tensor& image, EncoderCache* cache) {
  const auto& a = params.arch();
  if (image.rank() != 3 || image.dim(2) != a.channels)
    fail(ErrorCode::shape_mismatch, "encoder expects HxWx" + std::to_string(a.channels) + " input, got " +
                                        shape_str(image.shape()));
  stage_sizes(a, image.dim(0));
  stage_sizes(a, image.dim(1));
  const int pad = nn::conv_pad(a.padding, a.kernel);
  Tensor a1 = nn::conv2d(image, params.encoder.value("conv1.weight"), params.encoder.value("conv1.bias"), pad);
  nn::relu_inplace(a1);
  nn::PoolCache pc1, pc2;
  Tensor p1 = nn::maxpool2d(a1, a.pool, cache ? &pc1 : nullptr);
  Tensor a2 = nn::conv2d(p1, params.encoder.value("conv2.weight"), params.encoder.value("conv2.bias"), pad);
  nn::relu_inplace(a2);
  Tensor f = nn::maxpool2d(a2, a.pool, cache ? &pc2 : nullptr);
  if (cache) {
    cache->x = image;
    cache->a1 = std::move(a1);
    cache->p1 = std::move(p1);
    cache->a2 = std::move(a2);
    cache->pool1 = std::move(pc1);
    cache->pool2 = std::move(pc2);
  }
  return f;
}

void encoder_backward(CodecParams& params, const EncoderCache& cache, const Tensor& dfeatures, Tensor* dx) {
  const auto& a = params.arch();
  const int pad = nn::conv_pad(a.padding, a.kernel);
  Tensor da2 = nn::maxpool2d_backward(cache.pool2, dfeatures);
  nn::relu_backward_inplace(cache.a2, da2);
  Tensor dp1;
  nn::conv2d_backward(cache.p1, params.encoder.value("conv2.weight"), pad, da2, &dp1,
                      params.encoder.grad("conv2.weight"), params.encoder.grad("conv2.bias"));
  Tensor da1 = nn::maxpool2d_backward(cache.pool1, dp1);
  nn::relu_backward_inplace(cache.a1, da1);
  nn::conv2d_backward(cache.x, params.encoder.value("conv1.weight"), pad, da1, dx,
                      params.encoder.grad("conv1.weight"), params.encoder.grad("conv1.bias"));
}

// -- decoder ----------------------------------------------------------------------

Tensor decoder_forward(const CodecParams& params, const Tensor& features, const std::array<int, 3>& source_shape,
                       DecoderCache* cache) {
  const auto& a = params.arch();
  const StageSizes sh = stage_sizes(a, source_shape[0]);
  const StageSizes sw = stage_sizes(a, source_shape[1]);
  if (source_shape[2] != a.channels || features.rank() != 3 || features.dim(0) != sh.features ||
      features.dim(1) != sw.features || features.dim(2) != a.width2)
    fail(ErrorCode::shape_mismatch, "decoder: features " + shape_str(features.shape()) + " inconsistent with source " +
                                        shape_str({source_shape[0], source_shape[1], source_shape[2]}));
  const int pad = nn::conv_pad(a.padding, a.kernel);
  Tensor u1 = nn::resize_nearest(features, sh.conv2, sw.conv2);
  Tensor d1 = nn::conv_transpose2d(u1, params.decoder.value("deconv1.weight"), params.decoder.value("deconv1.bias"), pad);
  nn::relu_inplace(d1);
  Tensor u2 = nn::resize_nearest(d1, sh.conv1, sw.conv1);
  Tensor out = nn::conv_transpose2d(u2, params.decoder.value("deconv2.weight"), params.decoder.value("deconv2.bias"), pad);
  if (out.dim(0) != source_shape[0] || out.dim(1) != source_shape[1])
    fail(ErrorCode::internal, "decoder output " + shape_str(out.shape()) + " does not match source shape");
  if (cache) {
    cache->features = features;
    cache->u1_from = features.shape();
    cache->u1 = std::move(u1);
    cache->u2_from = d1.shape();
    cache->d1 = std::move(d1);
    cache->u2 = std::move(u2);
  }
  return out;
}

void decoder_backward(CodecParams& params, const DecoderCache& cache, const Tensor& dout, Tensor* dfeatures,
                      bool accumulate_params) {
  const auto& a = params.arch();
  const int pad = nn::conv_pad(a.padding, a.kernel);
  // Scratch gradients when the caller only wants the input gradient.
  Tensor sw2, sb2, sw1, sb1;
  Tensor* gw2 = &params.decoder.grad("deconv2.weight");
  Tensor* gb2 = &params.decoder.grad("deconv2.bias");
  Tensor* gw1 = &params.decoder.grad("deconv1.weight");
  Tensor* gb1 = &params.decoder.grad("deconv1.bias");
  if (!accumulate_params) {
    sw2 = Tensor(gw2->shape());
    sb2 = Tensor(gb2->shape());
    sw1 = Tensor(gw1->shape());
    sb1 = Tensor(gb1->shape());
    gw2 = &sw2;
    gb2 = &sb2;
    gw1 = &sw1;
    gb1 = &sb1;
  }
  Tensor du2;
  nn::conv_transpose2d_backward(cache.u2, params.decoder.value("deconv2.weight"), pad, dout, &du2, *gw2, *gb2);
  Tensor dd1 = nn::resize_nearest_backward(du2, cache.u2_from);
  nn::relu_backward_inplace(cache.d1, dd1);
  Tensor du1;
  nn::conv_transpose2d_backward(cache.u1, params.decoder.value("deconv1.weight"), pad, dd1,
                                dfeatures ? &du1 : nullptr, *gw1, *gb1);
  if (dfeatures) *dfeatures = nn::resize_nearest_backward(du1, cache.u1_from);
}

// -- mask network -------------------------------------------------------------------

Tensor mask_forward(const CodecParams& params, const Tensor& features, MaskCache* cache) {
  if (features.rank() != 3 || features.dim(2) != params.arch().width2)
    fail(ErrorCode::shape_mismatch, "mask network expects h x w x " + std::to_string(params.arch().width2) +
                                        " features, got " + shape_str(features.shape()));
  if (!features.all_finite()) fail(ErrorCode::numeric, "mask network input contains non-finite values");
  const int pad = kMaskKernel / 2;
  Tensor h1 = nn::conv2d(features, params.mask_net.value("conv1.weight"), params.mask_net.value("conv1.bias"), pad);
  nn::relu_inplace(h1);
  Tensor h2 = nn::conv2d(h1, params.mask_net.value("conv2.weight"), params.mask_net.value("conv2.bias"), pad);
  nn::relu_inplace(h2);
  Tensor probs = nn::conv2d(h2, params.mask_net.value("head.weight"), params.mask_net.value("head.bias"), 0);
  for (auto& v : probs.values()) v = nn::sigmoid(v);
  if (cache) {
    cache->features = features;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->probs = probs;
  }
  return probs;
}

void mask_backward(CodecParams& params, const MaskCache& cache, const Tensor& dprobs) {
  Tensor dz(dprobs.shape());
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = dprobs[i] * cache.probs[i] * (1.0 - cache.probs[i]);
  auto& m = params.mask_net;
  Tensor dh2;
  nn::conv2d_backward(cache.h2, m.value("head.weight"), 0, dz, &dh2, m.grad("head.weight"), m.grad("head.bias"));
  nn::relu_backward_inplace(cache.h2, dh2);
  Tensor dh1;
  nn::conv2d_backward(cache.h1, m.value("conv2.weight"), kMaskKernel / 2, dh2, &dh1, m.grad("conv2.weight"),
                      m.grad("conv2.bias"));
  nn::relu_backward_inplace(cache.h1, dh1);
  nn::conv2d_backward(cache.features, m.value("conv1.weight"), kMaskKernel / 2, dh1, nullptr, m.grad("conv1.weight"),
                      m.grad("conv1.bias"));
}

// -- operations -------------------------------------------------------------------------

FeatureTensor semantic_encode(const ImageSample& image, const CodecParams& params) {
  FeatureTensor f;
  f.data = encoder_forward(params, image.pixels, nullptr);
  f.source_shape = {image.height(), image.width(), image.channels()};
  return f;
}

ImageSample semantic_decode(const FeatureTensor& features, const CodecParams& params) {
  ImageSample out{decoder_forward(params, features.data, features.source_shape, nullptr), {}};
  clip_unit(out.pixels);
  return out;
}

MaskMatrix threshold_mask(const Tensor& probs) {
  MaskMatrix m;
  m.shape = probs.shape();
  m.bits.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    m.bits[i] = probs[i] >= 0.5 ? 1 : 0;
    m.retained_count += m.bits[i];
  }
  return m;
}

FeatureTensor apply_mask(const FeatureTensor& features, const MaskMatrix& mask) {
  if (mask.shape != features.data.shape())
    fail(ErrorCode::shape_mismatch, "mask " + shape_str(mask.shape) + " vs features " + shape_str(features.data.shape()));
  FeatureTensor out = features;
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (!mask.bits[i]) out.data[i] = 0.0;
  return out;
}

MaskMatrix full_mask(const Shape& shape) {
  MaskMatrix m;
  m.shape = shape;
  m.bits.assign(shape_numel(shape), 1);
  m.retained_count = m.bits.size();
  return m;
}

MaskedFeatures mask_features(const FeatureTensor& features, const CodecParams& params, MaskMode) {
  MaskMatrix mask = threshold_mask(mask_forward(params, features.data, nullptr));
  return MaskedFeatures{apply_mask(features, mask), std::move(mask)};
}

double mask_ratio(const MaskMatrix& mask) {
  if (mask.bits.empty()) fail(ErrorCode::invalid_argument, "mask_ratio of an empty mask");
  return static_cast<double>(mask.retained_count) / static_cast<double>(mask.bits.size());
}

}  // namespace lamsc::codec
