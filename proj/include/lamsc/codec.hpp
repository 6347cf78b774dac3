// SPDX-License-Identifier: Apache-2.0
//
// Convolutional semantic encoder/decoder and the adaptive-compression mask
// network. All three are resolution-agnostic: layer sizes are derived from the
// input image (encoder) or the recorded source shape (decoder).
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lamsc/image.hpp"
#include "lamsc/nn.hpp"

namespace lamsc::codec {

struct CodecArch {
  int channels = 3;
  int width1 = 32;
  int width2 = 64;
  int kernel = 3;
  nn::Padding padding = nn::Padding::same;
  int pool = 2;
  bool pool_floor = false;  // allow pooling windows that do not tile the map
  int mask_hidden = 16;
};

// Spatial sizes along one axis of the encoder: input -> conv1 -> pool1 ->
// conv2 -> pool2 (features). The decoder mirrors them in reverse.
struct StageSizes {
  int input, conv1, pool1, conv2, features;
};
StageSizes stage_sizes(const CodecArch& arch, int input);

struct FeatureTensor {
  Tensor data;                          // h x w x F
  std::array<int, 3> source_shape{};    // H, W, C of the encoded image
};

struct MaskMatrix {
  Shape shape;
  std::vector<std::uint8_t> bits;
  std::size_t retained_count = 0;
};

class CodecParams {
 public:
  CodecParams() = default;
  CodecParams(CodecArch arch, std::uint64_t seed);

  const CodecArch& arch() const noexcept { return arch_; }
  nn::ParamSet encoder{"codec.encoder"};
  nn::ParamSet decoder{"codec.decoder"};
  nn::ParamSet mask_net{"codec.mask_net"};

  Shape feature_shape(int height, int width) const;

 private:
  CodecArch arch_;
};

// -- differentiable passes ----------------------------------------------------

struct EncoderCache {
  Tensor x, a1, p1, a2;
  nn::PoolCache pool1, pool2;
};
Tensor encoder_forward(const CodecParams& params, const Tensor& image, EncoderCache* cache);
// Accumulates into params.encoder grads; writes the input gradient when dx != nullptr.
void encoder_backward(CodecParams& params, const EncoderCache& cache, const Tensor& dfeatures, Tensor* dx);

struct DecoderCache {
  Tensor features, u1, d1, u2;
  Shape u1_from, u2_from;
};
// Unclipped decoder output (H x W x C).
Tensor decoder_forward(const CodecParams& params, const Tensor& features, const std::array<int, 3>& source_shape,
                       DecoderCache* cache);
void decoder_backward(CodecParams& params, const DecoderCache& cache, const Tensor& dout, Tensor* dfeatures,
                      bool accumulate_params = true);

struct MaskCache {
  Tensor features, h1, h2, probs;
};
// Sigmoid keep-probabilities, same shape as features.
Tensor mask_forward(const CodecParams& params, const Tensor& features, MaskCache* cache);
// Straight-through backward: dprobs is dL/dmask (identity through the hard
// threshold), propagated through the sigmoid into mask_net grads.
void mask_backward(CodecParams& params, const MaskCache& cache, const Tensor& dprobs);

// -- operations -----------------------------------------------------------------

FeatureTensor semantic_encode(const ImageSample& image, const CodecParams& params);
ImageSample semantic_decode(const FeatureTensor& features, const CodecParams& params);

enum class MaskMode { train, eval };

struct MaskedFeatures {
  FeatureTensor masked;
  MaskMatrix mask;
};

// Forward is identical in both modes (hard 0.5 threshold on the sigmoid);
// the mode only documents which backward rule the caller will apply.
MaskedFeatures mask_features(const FeatureTensor& features, const CodecParams& params, MaskMode mode = MaskMode::eval);
MaskMatrix threshold_mask(const Tensor& probs);
FeatureTensor apply_mask(const FeatureTensor& features, const MaskMatrix& mask);
MaskMatrix full_mask(const Shape& shape);
double mask_ratio(const MaskMatrix& mask);

}  // namespace lamsc::codec
