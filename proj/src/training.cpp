// SPDX-License-Identifier: Apache-2.0
#include "lamsc/training.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lamsc/error.hpp"

namespace lamsc::training {

namespace {

constexpr std::uint64_t kChannelTag = 0xC4A1;
constexpr std::uint64_t kSemanticTag = 0x5E4A;
constexpr std::uint64_t kAscTag = 0xA5C0;
constexpr std::uint64_t kEvalTag = 0xE7A1;
constexpr std::uint64_t kShuffleTag = 0x5EED;
constexpr std::uint64_t kMiTag = 0x3141;

std::uint64_t eval_seed(const TrainConfig& c) { return nn::derive_seed(c.seed, kEvalTag); }

channel::ChannelConfig noise_for(const TrainConfig& c, std::uint64_t seed) {
  channel::ChannelConfig cfg;
  cfg.kind = c.channel_kind;
  cfg.snr_db = c.snr_db_train;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  const auto b = static_cast<std::size_t>(batch);
  for (std::size_t i = 0; i < n; i += b)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + b)));
  return out;
}

std::string trace_text(const std::vector<double>& trace) {
  std::string s;
  for (std::size_t i = 0; i < trace.size(); ++i) s += (i ? ", " : "") + format_double(trace[i]);
  return "[" + s + "]";
}

void check_progress(const std::vector<double>& watched, const std::vector<double>& objective, double factor,
                    const char* phase) {
  const double last = watched.back();
  if (!std::isfinite(last) || !std::isfinite(objective.back()))
    fail(ErrorCode::numeric, std::string(phase) + " phase produced a non-finite loss; trace " + trace_text(objective));
  const double initial = watched.front();
  if (initial > 0.0 && last > factor * initial)
    fail(ErrorCode::numeric, std::string(phase) + " phase diverged (loss above " + format_double(factor) +
                                 "x initial); trace " + trace_text(objective));
}

// Clipped output and the gradient mask of the clip.
Tensor clip_copy(const Tensor& raw) {
  Tensor out = raw;
  clip_unit(out);
  return out;
}

Tensor clipped_mse_grad(const Tensor& raw, const Tensor& clipped, const Tensor& target, double scale) {
  Tensor d(raw.shape());
  const double k = 2.0 * scale / static_cast<double>(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    d[i] = (raw[i] >= 0.0 && raw[i] <= 1.0) ? k * (clipped[i] - target[i]) : 0.0;
  return d;
}

std::array<int, 3> shape_of(const ImageSample& img) { return {img.height(), img.width(), img.channels()}; }

struct ScForward {
  Tensor features;
  codec::EncoderCache enc;
  channel::EncodeCache chan_enc;
  channel::DecodeCache chan_dec;
  codec::DecoderCache dec;
  Tensor raw_out, out;
};

// Full pipeline on a (possibly masked) feature tensor.
void forward_from_features(const ScModel& model, const Tensor& features, const std::array<int, 3>& source,
                           const channel::ChannelConfig& noise, ScForward& f) {
  Tensor y = channel::channel_encoder_forward(model.channel, features, &f.chan_enc);
  channel::transmit_inplace(y.storage(), noise);
  Tensor fh = channel::channel_decoder_forward(model.channel, y, &f.chan_dec);
  f.raw_out = codec::decoder_forward(model.codec, fh, source, &f.dec);
  f.out = clip_copy(f.raw_out);
}

}  // namespace

Phase parse_phase(std::string_view name) {
  if (name == "asi") return Phase::asi;
  if (name == "channel") return Phase::channel;
  if (name == "semantic") return Phase::semantic;
  if (name == "crossed") return Phase::crossed;
  if (name == "asc") return Phase::asc;
  fail(ErrorCode::config, "unknown training phase '" + std::string(name) + "'");
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::asi: return "asi";
    case Phase::channel: return "channel";
    case Phase::semantic: return "semantic";
    case Phase::crossed: return "crossed";
    case Phase::asc: return "asc";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorCode::config, "train.lr must be finite and >= 0");
  if (epochs < 1) fail(ErrorCode::config, "train.epochs must be >= 1");
  if (batch < 1) fail(ErrorCode::config, "train.batch must be >= 1");
  if (crossed_rounds < 1) fail(ErrorCode::config, "train.crossed_rounds must be >= 1");
  if (channel_epochs < 0 || semantic_epochs < 0 || asc_epochs < 0)
    fail(ErrorCode::config, "per-phase epoch counts must be >= 0");
  if (!std::isfinite(snr_db_train)) fail(ErrorCode::config, "train.snr_db_train must be finite");
  if (!(convergence_eps >= 0.0)) fail(ErrorCode::config, "train.convergence_eps must be >= 0");
  if (!(asc_mu >= 0.0) || !(mi_lambda >= 0.0)) fail(ErrorCode::config, "asc_mu and mi_lambda must be >= 0");
  if (mi_pairs < 64) fail(ErrorCode::config, "mi_pairs must be >= 64");
  if (!(divergence_factor > 1.0)) fail(ErrorCode::config, "divergence_factor must exceed 1");
}

int TrainConfig::epochs_for(Phase p) const {
  int e = 0;
  if (p == Phase::channel) e = channel_epochs;
  if (p == Phase::semantic) e = semantic_epochs;
  if (p == Phase::asc) e = asc_epochs;
  return e > 0 ? e : epochs;
}

ScModel make_model(const codec::CodecArch& arch, int channel_hidden, std::uint64_t seed) {
  ScModel m;
  m.codec = codec::CodecParams(arch, nn::derive_seed(seed, 1));
  m.channel = channel::ChannelCodec(arch.width2, channel_hidden, nn::derive_seed(seed, 2));
  m.mi = channel::make_mi_params(1, 1, nn::derive_seed(seed, 3));
  return m;
}

FreezeSet FreezeSet::capture(const std::vector<const nn::ParamSet*>& modules) {
  FreezeSet f;
  for (const auto* m : modules) {
    f.frozen_module_names.push_back(m->module());
    f.parameter_digests[m->module()] = m->digest();
  }
  return f;
}

void FreezeSet::verify(const std::vector<const nn::ParamSet*>& modules) const {
  for (const auto* m : modules) {
    auto it = parameter_digests.find(m->module());
    if (it == parameter_digests.end()) fail(ErrorCode::internal, "module " + m->module() + " is not in the freeze set");
    if (it->second != m->digest()) fail(ErrorCode::internal, "frozen module " + m->module() + " changed during training");
  }
}

// -- channel phase ------------------------------------------------------------------------

namespace {

struct PairSample {
  Tensor x, y;
  std::vector<std::pair<std::size_t, std::size_t>> where;  // (item, symbol index)
};

PairSample sample_pairs(const std::vector<const Tensor*>& tx, const std::vector<const Tensor*>& rx, std::size_t limit,
                        std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto* t : tx) total += t->size();
  const std::size_t p = std::min(limit, total);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> flat(total);
  std::iota(flat.begin(), flat.end(), 0);
  if (p < total) {
    // Partial Fisher-Yates: the first p entries are a uniform sample.
    for (std::size_t i = 0; i < p; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(flat[i], flat[pick(rng)]);
    }
    flat.resize(p);
    std::sort(flat.begin(), flat.end());
  }
  PairSample s{Tensor({static_cast<int>(p), 1}), Tensor({static_cast<int>(p), 1}), {}};
  s.where.reserve(p);
  std::size_t item = 0, offset = 0;
  for (std::size_t k = 0; k < p; ++k) {
    while (flat[k] >= offset + tx[item]->size()) offset += tx[item++]->size();
    const std::size_t j = flat[k] - offset;
    s.x[k] = (*tx[item])[j];
    s.y[k] = (*rx[item])[j];
    s.where.emplace_back(item, j);
  }
  return s;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

struct ChannelEval {
  double objective, mse;
};

ChannelEval evaluate_channel(const std::vector<Tensor>& features, const TrainConfig& config, ScModel& model) {
  const std::uint64_t seed = eval_seed(config);
  std::vector<Tensor> tx(features.size()), rx(features.size());
  double mse = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    tx[i] = channel::channel_encoder_forward(model.channel, features[i], nullptr);
    rx[i] = tx[i];
    channel::transmit_inplace(rx[i].storage(), noise_for(config, nn::derive_seed(seed, kChannelTag, i)));
    mse += nn::mean_squared_error(channel::channel_decoder_forward(model.channel, rx[i], nullptr), features[i]);
  }
  mse /= static_cast<double>(features.size());
  if (config.mi_lambda == 0.0) return {mse, mse};
  std::vector<const Tensor*> ptx, prx;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    ptx.push_back(&tx[i]);
    prx.push_back(&rx[i]);
  }
  const PairSample s = sample_pairs(ptx, prx, config.mi_pairs, nn::derive_seed(seed, kMiTag));
  const auto perm = shuffled(s.where.size(), nn::derive_seed(seed, kMiTag, 1));
  const double j = channel::dv_bound(model.mi, channel::MiBatch{s.x, s.y}, perm, 0.0, nullptr, nullptr);
  return {mse - config.mi_lambda * j, mse};
}

}  // namespace

PhaseResult train_channel_phase(const std::vector<Tensor>& features, const TrainConfig& config, ScModel& model,
                                std::uint64_t stream) {
  config.validate();
  if (features.empty()) fail(ErrorCode::invalid_argument, "channel phase needs at least one feature tensor");
  const std::vector<const nn::ParamSet*> frozen{&model.codec.encoder, &model.codec.decoder, &model.codec.mask_net};
  PhaseResult result;
  result.phase = Phase::channel;
  result.freeze = FreezeSet::capture(frozen);

  model.channel.encoder.zero_grad();
  model.channel.decoder.zero_grad();
  model.mi.net.zero_grad();
  nn::Adam opt_enc(model.channel.encoder, {config.lr});
  nn::Adam opt_dec(model.channel.decoder, {config.lr});
  nn::Adam opt_mi(model.mi.net, {config.lr});
  const std::uint64_t base = nn::derive_seed(config.seed, kChannelTag, stream);

  auto record = [&] {
    const ChannelEval e = evaluate_channel(features, config, model);
    result.loss_trace.push_back(e.objective);
    result.aux_trace.push_back(e.mse);
    result.mask_ratio_trace.push_back(1.0);
  };
  record();

  const int epochs = config.epochs_for(Phase::channel);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto batches = make_batches(features.size(), config.batch, nn::derive_seed(base, epoch, kShuffleTag));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const double scale = 1.0 / static_cast<double>(batch.size());
      std::vector<channel::EncodeCache> ec(batch.size());
      std::vector<Tensor> tx(batch.size()), rx(batch.size()), dsym(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor& f = features[batch[b]];
        tx[b] = channel::channel_encoder_forward(model.channel, f, &ec[b]);
        rx[b] = tx[b];
        channel::transmit_inplace(rx[b].storage(), noise_for(config, nn::derive_seed(base, epoch, batch[b])));
        channel::DecodeCache dc;
        const Tensor fh = channel::channel_decoder_forward(model.channel, rx[b], &dc);
        Tensor dout(fh.shape());
        const double k = 2.0 * scale / static_cast<double>(fh.size());
        for (std::size_t i = 0; i < fh.size(); ++i) dout[i] = k * (fh[i] - f[i]);
        // Equalised channel: dy/dx = 1.
        channel::channel_decoder_backward(model.channel, dc, dout, &dsym[b]);
      }
      if (config.mi_lambda > 0.0) {
        std::vector<const Tensor*> ptx, prx;
        for (std::size_t b = 0; b < batch.size(); ++b) {
          ptx.push_back(&tx[b]);
          prx.push_back(&rx[b]);
        }
        const std::uint64_t ms = nn::derive_seed(base, kMiTag, (static_cast<std::uint64_t>(epoch) << 32) | bi);
        const PairSample s = sample_pairs(ptx, prx, config.mi_pairs, ms);
        const auto perm = shuffled(s.where.size(), nn::derive_seed(ms, 1));
        Tensor dx, dy;
        // Statistics network ascends J; the channel codec descends -lambda J.
        channel::dv_bound(model.mi, channel::MiBatch{s.x, s.y}, perm, -1.0, &dx, &dy);
        for (std::size_t k = 0; k < s.where.size(); ++k) {
          const auto [item, j] = s.where[k];
          dsym[item][j] -= config.mi_lambda * (dx[k] + dy[k]);
        }
      }
      for (std::size_t b = 0; b < batch.size(); ++b)
        channel::channel_encoder_backward(model.channel, ec[b], dsym[b], nullptr);
      opt_enc.step();
      opt_dec.step();
      opt_mi.step();
    }
    record();
    check_progress(result.aux_trace, result.loss_trace, config.divergence_factor, "channel");
  }
  result.freeze.verify(frozen);
  return result;
}

// -- semantic phase -----------------------------------------------------------------------

PhaseResult train_semantic_phase(const std::vector<ImageSample>& images, const TrainConfig& config, ScModel& model,
                                 std::uint64_t stream) {
  config.validate();
  if (images.empty()) fail(ErrorCode::invalid_argument, "semantic phase needs at least one image");
  const std::vector<const nn::ParamSet*> frozen{&model.channel.encoder, &model.channel.decoder, &model.codec.mask_net,
                                                &model.mi.net};
  PhaseResult result;
  result.phase = Phase::semantic;
  result.freeze = FreezeSet::capture(frozen);

  model.codec.encoder.zero_grad();
  model.codec.decoder.zero_grad();
  nn::Adam opt_enc(model.codec.encoder, {config.lr});
  nn::Adam opt_dec(model.codec.decoder, {config.lr});
  const std::uint64_t base = nn::derive_seed(config.seed, kSemanticTag, stream);

  auto record = [&] {
    const double l = end_to_end_loss(images, model, config.channel_kind, config.snr_db_train, eval_seed(config));
    result.loss_trace.push_back(l);
    result.aux_trace.push_back(l);
    result.mask_ratio_trace.push_back(1.0);
  };
  record();

  const int epochs = config.epochs_for(Phase::semantic);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    for (const auto& batch : make_batches(images.size(), config.batch, nn::derive_seed(base, epoch, kShuffleTag))) {
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const ImageSample& img = images[idx];
        ScForward f;
        f.features = codec::encoder_forward(model.codec, img.pixels, &f.enc);
        forward_from_features(model, f.features, shape_of(img), noise_for(config, nn::derive_seed(base, epoch, idx)), f);
        const Tensor dout = clipped_mse_grad(f.raw_out, f.out, img.pixels, scale);
        Tensor dfh, dy, dfeat;
        codec::decoder_backward(model.codec, f.dec, dout, &dfh);
        channel::channel_decoder_backward(model.channel, f.chan_dec, dfh, &dy, false);
        channel::channel_encoder_backward(model.channel, f.chan_enc, dy, &dfeat, false);
        codec::encoder_backward(model.codec, f.enc, dfeat, nullptr);
      }
      opt_enc.step();
      opt_dec.step();
    }
    record();
    check_progress(result.loss_trace, result.loss_trace, config.divergence_factor, "semantic");
  }
  result.freeze.verify(frozen);
  return result;
}

// -- crossed training -----------------------------------------------------------------------

namespace {

std::string semantic_digest(const ScModel& m) {
  return m.codec.encoder.digest() + ":" + m.codec.decoder.digest();
}
std::string channel_digest(const ScModel& m) { return m.channel.encoder.digest() + ":" + m.channel.decoder.digest(); }

}  // namespace

CrossedResult crossed_train(const std::vector<ImageSample>& images, const std::vector<ImageSample>& validation,
                            const TrainConfig& config, ScModel& model) {
  config.validate();
  if (images.empty()) fail(ErrorCode::invalid_argument, "crossed training needs at least one image");
  const auto& val = validation.empty() ? images : validation;
  auto e2e = [&] { return end_to_end_loss(val, model, config.channel_kind, config.snr_db_train, eval_seed(config)); };

  CrossedResult out;
  out.initial_loss = e2e();
  double previous = out.initial_loss;
  for (int round = 1; round <= config.crossed_rounds; ++round) {
    std::vector<Tensor> features;
    features.reserve(images.size());
    for (const auto& img : images) features.push_back(codec::encoder_forward(model.codec, img.pixels, nullptr));
    out.phases.push_back(train_channel_phase(features, config, model, 2 * static_cast<std::uint64_t>(round)));
    out.log.push_back({round, "channel", e2e(), semantic_digest(model), channel_digest(model)});

    out.phases.push_back(train_semantic_phase(images, config, model, 2 * static_cast<std::uint64_t>(round) + 1));
    const double loss = e2e();
    out.log.push_back({round, "semantic", loss, semantic_digest(model), channel_digest(model)});
    out.round_end_losses.push_back(loss);
    out.rounds_run = round;
    if (previous - loss < config.convergence_eps) {
      out.converged = true;
      break;
    }
    previous = loss;
  }
  return out;
}

// -- adaptive compression ---------------------------------------------------------------------

namespace {

struct AscEval {
  double diff, ratio;
};

AscEval evaluate_asc(const std::vector<ImageSample>& images, const TrainConfig& config, const ScModel& model) {
  const std::uint64_t seed = eval_seed(config);
  double diff = 0.0, ratio = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto noise = noise_for(config, nn::derive_seed(seed, kAscTag, i));
    const Tensor feat = codec::encoder_forward(model.codec, images[i].pixels, nullptr);
    const codec::MaskMatrix mask = codec::threshold_mask(codec::mask_forward(model.codec, feat, nullptr));
    Tensor masked = feat;
    for (std::size_t k = 0; k < masked.size(); ++k) masked[k] *= mask.bits[k];
    ScForward raw, msk;
    forward_from_features(model, feat, shape_of(images[i]), noise, raw);
    forward_from_features(model, masked, shape_of(images[i]), noise, msk);
    diff += nn::mean_squared_error(raw.out, msk.out);
    ratio += codec::mask_ratio(mask);
  }
  const double n = static_cast<double>(images.size());
  return {diff / n, ratio / n};
}

}  // namespace

PhaseResult train_asc(const std::vector<ImageSample>& images, const TrainConfig& config, ScModel& model,
                      const std::vector<const nn::ParamSet*>& extra_frozen) {
  config.validate();
  if (images.empty()) fail(ErrorCode::invalid_argument, "ASC training needs at least one image");
  std::vector<const nn::ParamSet*> frozen{&model.codec.encoder, &model.codec.decoder, &model.channel.encoder,
                                          &model.channel.decoder, &model.mi.net};
  frozen.insert(frozen.end(), extra_frozen.begin(), extra_frozen.end());
  PhaseResult result;
  result.phase = Phase::asc;
  result.freeze = FreezeSet::capture(frozen);

  model.codec.mask_net.zero_grad();
  nn::Adam opt(model.codec.mask_net, {config.lr});
  const std::uint64_t base = nn::derive_seed(config.seed, kAscTag);

  auto record = [&] {
    const AscEval e = evaluate_asc(images, config, model);
    result.loss_trace.push_back(e.diff + config.asc_mu * e.ratio);
    result.aux_trace.push_back(e.diff);
    result.mask_ratio_trace.push_back(e.ratio);
  };
  record();

  const int epochs = config.epochs_for(Phase::asc);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    bool any_retained = false;
    for (const auto& batch : make_batches(images.size(), config.batch, nn::derive_seed(base, epoch, kShuffleTag))) {
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const ImageSample& img = images[idx];
        // Both paths see the same noise realisation.
        const auto noise = noise_for(config, nn::derive_seed(base, epoch, idx));
        const Tensor feat = codec::encoder_forward(model.codec, img.pixels, nullptr);
        codec::MaskCache mc;
        const codec::MaskMatrix mask = codec::threshold_mask(codec::mask_forward(model.codec, feat, &mc));
        any_retained = any_retained || mask.retained_count > 0;
        Tensor masked = feat;
        for (std::size_t k = 0; k < masked.size(); ++k) masked[k] *= mask.bits[k];

        ScForward raw, msk;
        forward_from_features(model, feat, shape_of(img), noise, raw);
        forward_from_features(model, masked, shape_of(img), noise, msk);
        const Tensor dout = clipped_mse_grad(msk.raw_out, msk.out, raw.out, scale);
        Tensor dfh, dy, dmasked;
        codec::decoder_backward(model.codec, msk.dec, dout, &dfh, false);
        channel::channel_decoder_backward(model.channel, msk.chan_dec, dfh, &dy, false);
        channel::channel_encoder_backward(model.channel, msk.chan_enc, dy, &dmasked, false);
        Tensor dmask(feat.shape());
        const double sparsity = config.asc_mu * scale / static_cast<double>(feat.size());
        for (std::size_t k = 0; k < feat.size(); ++k) dmask[k] = dmasked[k] * feat[k] + sparsity;
        codec::mask_backward(model.codec, mc, dmask);
      }
      opt.step();
    }
    if (!any_retained)
      fail(ErrorCode::numeric, "every mask was all zero for a full epoch (degenerate collapse); lower train.asc_mu");
    record();
    check_progress(result.loss_trace, result.loss_trace, config.divergence_factor, "asc");
  }
  result.freeze.verify(frozen);
  return result;
}

// -- inference ------------------------------------------------------------------------------------

TransmitOutcome run_sc(const ImageSample& image, const ScModel& model, const channel::ChannelConfig& channel,
                       bool use_mask) {
  validate_image(image);
  const Tensor feat = codec::encoder_forward(model.codec, image.pixels, nullptr);
  TransmitOutcome out;
  out.feature_shape = feat.shape();
  out.mask = use_mask ? codec::threshold_mask(codec::mask_forward(model.codec, feat, nullptr))
                      : codec::full_mask(feat.shape());
  Tensor masked = feat;
  for (std::size_t k = 0; k < masked.size(); ++k) masked[k] *= out.mask.bits[k];
  ScForward f;
  forward_from_features(model, masked, shape_of(image), channel, f);
  out.recovered.pixels = std::move(f.out);
  out.recovered.source_id = image.source_id;
  return out;
}

double end_to_end_loss(const std::vector<ImageSample>& images, const ScModel& model, channel::ChannelKind kind,
                       double snr_db, std::uint64_t seed, bool use_mask) {
  if (images.empty()) fail(ErrorCode::invalid_argument, "end-to-end loss over an empty image set");
  double total = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    channel::ChannelConfig cfg;
    cfg.kind = kind;
    cfg.snr_db = snr_db;
    cfg.seed = nn::derive_seed(seed, kSemanticTag, i);
    total += nn::mean_squared_error(run_sc(images[i], model, cfg, use_mask).recovered.pixels, images[i].pixels);
  }
  return total / static_cast<double>(images.size());
}

// -- CSV ------------------------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<TraceRow> trace_rows(const PhaseResult& result, const std::string& phase_name, long first_step,
                                 double snr_db, std::uint64_t seed) {
  std::vector<TraceRow> rows;
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    const double ratio = i < result.mask_ratio_trace.size() ? result.mask_ratio_trace[i] : 1.0;
    rows.push_back({first_step + static_cast<long>(i), phase_name, result.loss_trace[i], ratio, snr_db, seed});
  }
  return rows;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << kTraceHeader << '\n';
  for (const auto& r : rows)
    out << r.step << ',' << r.phase << ',' << format_double(r.loss) << ',' << format_double(r.mask_ratio) << ','
        << format_double(r.snr_db) << ',' << r.seed << '\n';
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) fail(ErrorCode::io, path + ": unexpected loss CSV header");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string step, phase, loss, ratio, snr, seed;
    if (!std::getline(ss, step, ',') || !std::getline(ss, phase, ',') || !std::getline(ss, loss, ',') ||
        !std::getline(ss, ratio, ',') || !std::getline(ss, snr, ',') || !std::getline(ss, seed))
      fail(ErrorCode::io, path + ": malformed row '" + line + "'");
    try {
      rows.push_back({std::stol(step), phase, std::stod(loss), std::stod(ratio), std::stod(snr), std::stoull(seed)});
    } catch (const std::exception&) {
      fail(ErrorCode::io, path + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

}  // namespace lamsc::training
