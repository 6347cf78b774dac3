// SPDX-License-Identifier: Apache-2.0
//
// Attention-based semantic integration. Segments are stacked as channels;
// channel attention scores each segment from its max- and mean-pooled colour
// descriptor through a shared two-layer MLP, and spatial attention gates the
// sum of the weighted segments with a 7x7 convolution over per-pixel max/mean
// maps.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lamsc/image.hpp"
#include "lamsc/nn.hpp"
#include "lamsc/skb.hpp"

namespace lamsc::asi {

inline constexpr int kSpatialKernel = 7;

struct SegmentStack {
  Tensor data;  // K x H x W x C, zero beyond valid_count
  int valid_count = 0;
  std::vector<std::string> labels;  // size K, empty for padding

  int k() const { return data.dim(0); }
  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }
  int channels() const { return data.dim(3); }
};

SegmentStack make_stack(const skb::SegmentSet& segments, int k_max);

struct AttentionParams {
  nn::ParamSet params{"asi"};
  std::uint64_t rng_seed = 0;
  int channels = 0;
  int k_max = 0;
  int hidden = 0;
};

// MLP widths C -> ceil(k_max/2) -> 1; He-initialised weights, zero biases.
AttentionParams make_attention_params(int channels, int k_max, std::uint64_t seed);

struct ChannelAttentionResult {
  std::vector<double> weights;  // size K, each in (0,1)
  Tensor low_level;             // K x H x W x C
};

ChannelAttentionResult channel_attention(const SegmentStack& stack, const AttentionParams& params);
ImageSample spatial_attention(const Tensor& low_level, const AttentionParams& params);
ImageSample integrate(const SegmentStack& stack, const AttentionParams& params);

// Pixelwise sum of the selected segments, clipped to [0,1].
ImageSample human_select(const SegmentStack& stack, const std::vector<std::uint8_t>& selection);

// MSE between integrate(stack) and target; adds parameter gradients into
// params.params (scaled by grad_scale) when accumulate is set.
double integration_loss(const SegmentStack& stack, const ImageSample& target, AttentionParams& params,
                        bool accumulate, double grad_scale = 1.0);

// -- experience base ----------------------------------------------------------

enum class Provenance { human, synthetic_oracle };

struct ExperienceRecord {
  SegmentStack stack;
  std::vector<std::uint8_t> selection;  // size K
};

struct ExperienceBase {
  std::vector<ExperienceRecord> records;
  Provenance provenance = Provenance::synthetic_oracle;
};

// Selects the segments whose label is in `interest`; stacks without any
// interesting valid segment are skipped.
ExperienceBase build_synthetic_experience(const std::vector<SegmentStack>& stacks,
                                          const std::vector<std::string>& interest);
std::vector<std::uint8_t> interest_selection(const SegmentStack& stack, const std::vector<std::string>& interest);

// Directory of record_NNNNN.bin files plus manifest.json. Record layout
// (little-endian): "LAMSCEXP", u32 version, i32 K,H,W,C,valid_count,
// K selection bytes ('0'/'1'), K length-prefixed labels, K*H*W*C f64.
void save_experience(const ExperienceBase& base, const std::string& dir);
ExperienceBase load_experience(const std::string& dir);

struct AsiHyper {
  double lr = 1e-2;
  int epochs = 30;
  int batch = 16;
};

struct AsiTrainResult {
  std::vector<double> loss_trace;  // [0] before training, then one per epoch
};

AsiTrainResult train_asi(const ExperienceBase& base, AttentionParams& params, const AsiHyper& hyper);

}  // namespace lamsc::asi
