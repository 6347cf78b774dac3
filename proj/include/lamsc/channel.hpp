// SPDX-License-Identifier: Apache-2.0
//
// Channel encoder/decoder, simulated physical channels and a neural
// Donsker-Varadhan mutual-information lower bound.
//
// The channel MLPs act position-wise on the h x w grid of F-dimensional
// feature vectors (shared weights, F -> hidden -> F), so a feature tensor of
// h*w*F elements maps to N = h*w*F real symbols.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lamsc/codec.hpp"
#include "lamsc/nn.hpp"

namespace lamsc::channel {

struct SymbolVector {
  std::vector<double> symbols;
  double power() const;
};

enum class ChannelKind { awgn, rayleigh };
ChannelKind parse_kind(std::string_view name);
std::string to_string(ChannelKind kind);

struct ChannelConfig {
  ChannelKind kind = ChannelKind::awgn;
  double snr_db = 10.0;
  std::uint64_t seed = 0;
  // Forces the noise variance (0 gives a noiseless channel).
  std::optional<double> noise_variance_override;
};

class ChannelCodec {
 public:
  ChannelCodec() = default;
  ChannelCodec(int feature_width, int hidden, std::uint64_t seed);

  int feature_width() const noexcept { return feature_width_; }
  int hidden() const noexcept { return hidden_; }

  nn::ParamSet encoder{"channel.encoder"};
  nn::ParamSet decoder{"channel.decoder"};

 private:
  int feature_width_ = 0;
  int hidden_ = 0;
};

// -- differentiable passes --------------------------------------------------------

struct EncodeCache {
  Tensor features, hidden, raw;  // raw = pre-normalisation output
  double scale = 1.0;
  Tensor symbols;
};
// Power-normalised symbols laid out like the features (h x w x F).
Tensor channel_encoder_forward(const ChannelCodec& codec, const Tensor& features, EncodeCache* cache);
void channel_encoder_backward(ChannelCodec& codec, const EncodeCache& cache, const Tensor& dsymbols, Tensor* dfeatures,
                              bool accumulate_params = true);

struct DecodeCache {
  Tensor received, hidden;
};
Tensor channel_decoder_forward(const ChannelCodec& codec, const Tensor& received, DecodeCache* cache);
void channel_decoder_backward(ChannelCodec& codec, const DecodeCache& cache, const Tensor& dout, Tensor* dreceived,
                              bool accumulate_params = true);

// -- operations -------------------------------------------------------------------

SymbolVector channel_encode(const codec::FeatureTensor& features, const ChannelCodec& codec);
double noise_variance(double snr_db, double signal_power);
SymbolVector transmit(const SymbolVector& symbols, const ChannelConfig& config);
// In-place variant on a symbol tensor; returns the fading gain used (1 for AWGN).
double transmit_inplace(std::span<double> symbols, const ChannelConfig& config);
codec::FeatureTensor channel_decode(const SymbolVector& symbols, const ChannelCodec& codec, const Shape& feature_shape,
                                    const std::array<int, 3>& source_shape);

// -- mutual information -------------------------------------------------------------

struct MIEstimatorParams {
  nn::ParamSet net{"channel.mi"};
  int input_dim = 0;
  int hidden = 64;
};
MIEstimatorParams make_mi_params(int x_dim, int y_dim, std::uint64_t seed, int hidden = 64);

// Rows are samples: x is n x dx, y is n x dy.
struct MiBatch {
  const Tensor& x;
  const Tensor& y;
};

// Donsker-Varadhan bound  mean T(x,y) - log mean exp T(x, y[perm]).
// Adds dJ/dparams * param_scale into the estimator grads when param_scale != 0,
// and dJ/dx, dJ/dy into dx/dy when non-null.
double dv_bound(MIEstimatorParams& params, const MiBatch& batch, const std::vector<std::size_t>& perm,
                double param_scale, Tensor* dx, Tensor* dy);

struct MiOptions {
  double lr = 1e-3;
  std::size_t minibatch = 0;  // 0 = whole sample each step
  std::uint64_t seed = 0;
  int eval_shuffles = 16;
};

// Runs `steps` gradient-ascent updates of the statistics network and returns
// the bound evaluated on the full sample (averaged over fresh shuffles).
double estimate_mi(const Tensor& x, const Tensor& y, MIEstimatorParams& params, int steps, const MiOptions& options = {});

}  // namespace lamsc::channel
