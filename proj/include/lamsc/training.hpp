// SPDX-License-Identifier: Apache-2.0
//
// Training regimes for the semantic-communication model: channel phase
// (feature reconstruction minus a mutual-information bonus), semantic phase
// (image reconstruction through the frozen channel), crossed alternation of
// the two, and adaptive-compression mask training on a frozen model.
//
// Every phase records a deterministic evaluation pass (fixed evaluation noise)
// before training and after each epoch; training noise changes every epoch.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lamsc/channel.hpp"
#include "lamsc/codec.hpp"
#include "lamsc/image.hpp"

namespace lamsc::training {

enum class Phase { asi, channel, semantic, crossed, asc };
Phase parse_phase(std::string_view name);
std::string to_string(Phase phase);

struct TrainConfig {
  Phase phase = Phase::crossed;
  double lr = 1e-3;
  int epochs = 10;
  int batch = 8;
  double snr_db_train = 10.0;
  int crossed_rounds = 10;
  double convergence_eps = 1e-4;
  std::uint64_t seed = 1;

  // Per-phase epoch counts; 0 falls back to `epochs`.
  int channel_epochs = 0;
  int semantic_epochs = 0;
  int asc_epochs = 0;
  channel::ChannelKind channel_kind = channel::ChannelKind::awgn;
  double mi_lambda = 0.01;
  std::size_t mi_pairs = 2048;
  double asc_mu = 0.05;
  double divergence_factor = 10.0;

  void validate() const;
  int epochs_for(Phase p) const;
};

struct ScModel {
  codec::CodecParams codec;
  channel::ChannelCodec channel;
  channel::MIEstimatorParams mi;
};

ScModel make_model(const codec::CodecArch& arch, int channel_hidden, std::uint64_t seed);

// Snapshot of parameter digests for modules that must not change.
struct FreezeSet {
  std::vector<std::string> frozen_module_names;
  std::map<std::string, std::string> parameter_digests;

  static FreezeSet capture(const std::vector<const nn::ParamSet*>& modules);
  // Throws internal when any digest changed.
  void verify(const std::vector<const nn::ParamSet*>& modules) const;
};

struct PhaseResult {
  Phase phase = Phase::channel;
  std::vector<double> loss_trace;        // objective, [0] before training
  std::vector<double> aux_trace;         // channel: feature MSE; asc: path difference
  std::vector<double> mask_ratio_trace;  // asc only
  FreezeSet freeze;
};

PhaseResult train_channel_phase(const std::vector<Tensor>& features, const TrainConfig& config, ScModel& model,
                                std::uint64_t stream = 0);
PhaseResult train_semantic_phase(const std::vector<ImageSample>& images, const TrainConfig& config, ScModel& model,
                                 std::uint64_t stream = 0);

struct RoundEntry {
  int round = 0;
  std::string module;  // "channel" or "semantic"
  double end_to_end_loss = 0.0;
  std::string semantic_digest;
  std::string channel_digest;
};

struct CrossedResult {
  double initial_loss = 0.0;
  std::vector<double> round_end_losses;
  std::vector<RoundEntry> log;
  std::vector<PhaseResult> phases;
  int rounds_run = 0;
  bool converged = false;
};

// `validation` scores end-to-end loss per round; pass the training set when no
// split is available.
CrossedResult crossed_train(const std::vector<ImageSample>& images, const std::vector<ImageSample>& validation,
                            const TrainConfig& config, ScModel& model);

// Mask-network training on a frozen model. `extra_frozen` (e.g. attention
// parameters) is included in the freeze check.
PhaseResult train_asc(const std::vector<ImageSample>& images, const TrainConfig& config, ScModel& model,
                      const std::vector<const nn::ParamSet*>& extra_frozen = {});

// -- inference helpers ---------------------------------------------------------------

struct TransmitOutcome {
  ImageSample recovered;
  codec::MaskMatrix mask;
  Shape feature_shape;
};

// encode -> (mask) -> channel encode -> transmit -> channel decode -> decode.
TransmitOutcome run_sc(const ImageSample& image, const ScModel& model, const channel::ChannelConfig& channel,
                       bool use_mask);

double end_to_end_loss(const std::vector<ImageSample>& images, const ScModel& model, channel::ChannelKind kind,
                       double snr_db, std::uint64_t seed, bool use_mask = false);

// -- loss CSV --------------------------------------------------------------------------

struct TraceRow {
  long step = 0;
  std::string phase;
  double loss = 0.0;
  double mask_ratio = 1.0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kTraceHeader = "step,phase,loss,mask_ratio,snr_db,seed";
std::vector<TraceRow> trace_rows(const PhaseResult& result, const std::string& phase_name, long first_step,
                                 double snr_db, std::uint64_t seed);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::string& path);

std::string format_double(double v);

}  // namespace lamsc::training
