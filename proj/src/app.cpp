// SPDX-License-Identifier: Apache-2.0
#include "lamsc/app.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "lamsc/checkpoint.hpp"
#include "lamsc/error.hpp"
#include "lamsc/hash.hpp"

namespace lamsc::app {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kLamscModelTag = 0x1A35C;
constexpr std::uint64_t kBaselineModelTag = 0xBA5E;
constexpr std::uint64_t kAttentionTag = 0xA51;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCode::io, "cannot create directory " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string model_arch_json(const config::RunConfig& c) {
  const Json j = Json::parse(c.to_json());
  Json a = j["codec"];
  a["image_size"] = j["image_size"];
  return a.dump();
}

// Resolves a file path or a dataset stem. Images at least 8x8 are resized to
// the configured resolution; smaller ones are passed through so the
// segmentation precondition reports them.
ImageSample resolve_image(const Workspace& ws, const std::string& ref) {
  if (fs::is_regular_file(ref)) {
    ImageSample img = io::load_image(ref);
    img.source_id = fs::path(ref).stem().string();
    if (img.height() >= kMinImageSide && img.width() >= kMinImageSide)
      img = resize_image(img, ws.config.image_height, ws.config.image_width);
    return img;
  }
  for (std::size_t i = 0; i < ws.dataset.size(); ++i)
    if (ws.dataset.entries()[i].stem == ref) return ws.dataset.load_image(i);
  fail(ErrorCode::io, "image not found (neither a file nor a dataset stem): " + ref);
}

std::vector<ImageSample> load_images(const Workspace& ws, const std::vector<std::size_t>& idx) {
  std::vector<ImageSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(ws.dataset.load_image(i));
  return out;
}

std::optional<asi::AttentionParams> maybe_attention(const Workspace& ws) {
  const std::string path = ws.output(kAsiCheckpoint);
  if (!fs::exists(path)) return std::nullopt;
  return load_attention(path, ws.config);
}

Json checkpoint_hashes(const Workspace& ws, std::initializer_list<std::string> names) {
  Json j = Json::object();
  for (const auto& n : names)
    if (fs::exists(ws.output(n))) j[n] = sha256_file(ws.output(n));
  return j;
}

std::vector<ImageSample> semantic_images(const Workspace& ws, const std::vector<ImageSample>& images,
                                         const asi::AttentionParams* attention) {
  std::vector<ImageSample> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(semantic_view(img, *ws.backend, ws.config, attention).semantic_aware);
  return out;
}

Json freeze_json(const training::FreezeSet& f) {
  Json j = Json::object();
  for (const auto& [k, v] : f.parameter_digests) j[k] = v;
  return j;
}

}  // namespace

std::string sc_checkpoint_name(bool lamsc) { return lamsc ? "sc_lamsc.ckpt" : "sc_baseline.ckpt"; }

Variant parse_variant(const std::string& name) {
  if (name == "lamsc") return Variant::lamsc;
  if (name == "baseline") return Variant::baseline;
  if (name == "both") return Variant::both;
  fail(ErrorCode::invalid_argument, "unknown variant '" + name + "' (expected lamsc, baseline or both)");
}

std::unique_ptr<skb::Backend> make_backend(const config::RunConfig& config, const data::Dataset* dataset,
                                           const std::string& work_dir) {
  switch (config.backend) {
    case skb::BackendKind::trivial: return std::make_unique<skb::TrivialBackend>();
    case skb::BackendKind::oracle:
      if (!dataset) fail(ErrorCode::config, "the oracle backend needs a dataset");
      return std::make_unique<skb::OracleBackend>(*dataset, config.oracle_tolerance);
    case skb::BackendKind::foundation_adapter:
      return std::make_unique<skb::AdapterBackend>(config.adapter_command, work_dir);
  }
  fail(ErrorCode::config, "unknown backend");
}

Workspace Workspace::open(const config::RunConfig& config) {
  Workspace ws{config, data::Dataset::open(config.dataset_dir, config.image_height, config.image_width,
                                           static_cast<std::size_t>(config.max_images + config.eval_images)),
               {}, {}, nullptr};
  const std::size_t n = ws.dataset.size();
  if (n == 0) fail(ErrorCode::io, "dataset " + config.dataset_dir + " contains no images");
  const auto held = static_cast<std::size_t>(config.eval_images);
  if (n > held) {
    for (std::size_t i = 0; i < std::min(n - held, static_cast<std::size_t>(config.max_images)); ++i)
      ws.train_indices.push_back(i);
    for (std::size_t i = n - held; i < n; ++i) ws.eval_indices.push_back(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) ws.train_indices.push_back(i), ws.eval_indices.push_back(i);
  }
  ensure_dir(config.output_dir);
  ws.backend = make_backend(config, &ws.dataset, (fs::path(config.output_dir) / "adapter_work").string());
  return ws;
}

std::string Workspace::output(const std::string& name) const { return (fs::path(config.output_dir) / name).string(); }

SemanticView semantic_view(const ImageSample& image, skb::Backend& backend, const config::RunConfig& config,
                           const asi::AttentionParams* attention) {
  SemanticView v;
  v.segments = skb::segment(image, backend, config.k_max);
  v.stack = asi::make_stack(v.segments, config.k_max);
  v.selection = asi::interest_selection(v.stack, config.interest);
  if (std::none_of(v.selection.begin(), v.selection.end(), [](auto s) { return s != 0; }))
    for (int k = 0; k < v.stack.valid_count; ++k) v.selection[static_cast<std::size_t>(k)] = 1;
  v.semantic_aware = attention ? asi::integrate(v.stack, *attention) : asi::human_select(v.stack, v.selection);
  v.semantic_aware.source_id = image.source_id;
  return v;
}

// -- checkpoints -------------------------------------------------------------------------------

void save_sc(const std::string& path, const training::ScModel& model, const config::RunConfig& config,
             const std::string& variant) {
  ckpt::Checkpoint c;
  c.config_digest = config.digest();
  c.metadata_json = Json{{"kind", "sc"}, {"variant", variant}, {"arch", Json::parse(model_arch_json(config))}}.dump();
  for (const auto* ps : {&model.codec.encoder, &model.codec.decoder, &model.codec.mask_net, &model.channel.encoder,
                         &model.channel.decoder, &model.mi.net})
    ckpt::add_params(c, *ps);
  ckpt::save_checkpoint(path, c);
}

training::ScModel load_sc(const std::string& path, const config::RunConfig& config) {
  const ckpt::Checkpoint c = ckpt::load_checkpoint(path);
  training::ScModel m = training::make_model(config.codec, config.channel_hidden, config.seed);
  for (auto* ps : {&m.codec.encoder, &m.codec.decoder, &m.codec.mask_net, &m.channel.encoder, &m.channel.decoder,
                   &m.mi.net})
    ckpt::load_params(c, *ps);
  return m;
}

void save_attention(const std::string& path, const asi::AttentionParams& params, const config::RunConfig& config) {
  ckpt::Checkpoint c;
  c.config_digest = config.digest();
  c.metadata_json = Json{{"kind", "asi"}, {"k_max", params.k_max}, {"channels", params.channels}}.dump();
  ckpt::add_params(c, params.params);
  ckpt::save_checkpoint(path, c);
}

asi::AttentionParams load_attention(const std::string& path, const config::RunConfig& config) {
  const ckpt::Checkpoint c = ckpt::load_checkpoint(path);
  asi::AttentionParams p = asi::make_attention_params(config.codec.channels, config.k_max, 0);
  ckpt::load_params(c, p.params);
  return p;
}

void save_mask_net(const std::string& path, const training::ScModel& model, const config::RunConfig& config) {
  ckpt::Checkpoint c;
  c.config_digest = config.digest();
  c.metadata_json = Json{{"kind", "asc"}}.dump();
  ckpt::add_params(c, model.codec.mask_net);
  ckpt::save_checkpoint(path, c);
}

void load_mask_net(const std::string& path, training::ScModel& model) {
  ckpt::load_params(ckpt::load_checkpoint(path), model.codec.mask_net);
}

// -- segment --------------------------------------------------------------------------------------

SegmentResult cmd_segment(const config::RunConfig& config, const std::string& image, const std::string& out_dir,
                          bool human_selection) {
  Workspace ws = Workspace::open(config);
  const ImageSample img = resolve_image(ws, image);
  ensure_dir(out_dir);
  std::optional<asi::AttentionParams> attention;
  if (!human_selection) attention = maybe_attention(ws);
  const SemanticView v = semantic_view(img, *ws.backend, config, attention ? &*attention : nullptr);

  SegmentResult r;
  Json segs = Json::array();
  for (std::size_t k = 0; k < v.segments.masks.size(); ++k) {
    const auto& m = v.segments.masks[k];
    char name[64];
    std::snprintf(name, sizeof name, "mask_%02zu.png", k);
    const std::string path = (fs::path(out_dir) / name).string();
    skb::save_mask_png(path, m);
    r.mask_paths.push_back(path);
    segs.push_back({{"file", name},
                    {"label", m.label},
                    {"score", m.score},
                    {"pixels", m.pixel_count()},
                    {"selected", k < v.selection.size() && v.selection[k] != 0}});
  }
  r.preview_path = (fs::path(out_dir) / "semantic_aware.png").string();
  io::save_png(r.preview_path, v.semantic_aware);
  r.manifest_path = (fs::path(out_dir) / "segments.json").string();
  write_text(r.manifest_path, Json{{"command", "segment"},
                                   {"source", img.source_id},
                                   {"backend", v.segments.backend_name},
                                   {"integration", attention ? "attention" : "human_select"},
                                   {"config_digest", config.digest()},
                                   {"segments", segs}}
                                  .dump(2));
  return r;
}

// -- train ------------------------------------------------------------------------------------------

TrainResult cmd_train(const config::RunConfig& config, training::Phase phase, Variant variant) {
  Workspace ws = Workspace::open(config);
  training::TrainConfig tc = config.train;
  tc.phase = phase;
  tc.channel_kind = config.channel.kind;
  tc.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::string phase_name = training::to_string(phase);

  TrainResult result;
  Json manifest{{"command", "train"},
                {"phase", phase_name},
                {"config_digest", config.digest()},
                {"seed", config.seed},
                {"train_seed", tc.seed},
                {"dataset", {{"root", config.dataset_dir}, {"train_images", ws.train_indices.size()}}}};
  Json runs = Json::array();
  Json phases_run = Json::array();
  const std::vector<ImageSample> originals = load_images(ws, ws.train_indices);

  if (phase == training::Phase::asi) {
    std::vector<asi::SegmentStack> stacks;
    for (const auto& img : originals)
      stacks.push_back(asi::make_stack(skb::segment(img, *ws.backend, config.k_max), config.k_max));
    const asi::ExperienceBase base = asi::build_synthetic_experience(stacks, config.interest);
    asi::save_experience(base, ws.output("experience"));
    asi::AttentionParams params =
        asi::make_attention_params(config.codec.channels, config.k_max, nn::derive_seed(config.seed, kAttentionTag));
    const auto r = asi::train_asi(base, params, config.asi);
    save_attention(ws.output(kAsiCheckpoint), params, config);
    training::PhaseResult pr;
    pr.phase = phase;
    pr.loss_trace = r.loss_trace;
    const std::string csv = ws.output("loss_asi.csv");
    training::write_trace_csv(csv, training::trace_rows(pr, "asi", 0, 0.0, config.seed));
    result.checkpoints.push_back(ws.output(kAsiCheckpoint));
    result.loss_csvs.push_back(csv);
    result.phases_run.push_back("asi");
    phases_run.push_back("asi");
    runs.push_back({{"variant", "attention"}, {"records", base.records.size()}, {"final_loss", r.loss_trace.back()}});
  } else {
    std::vector<bool> variants;
    if (variant != Variant::baseline) variants.push_back(true);
    if (variant != Variant::lamsc && phase != training::Phase::asc) variants.push_back(false);
    if (variants.empty()) fail(ErrorCode::invalid_argument, "the asc phase applies to the lamsc variant only");
    const std::optional<asi::AttentionParams> attention = maybe_attention(ws);

    for (const bool lamsc : variants) {
      const std::string vname = lamsc ? "lamsc" : "baseline";
      const std::string sc_path = ws.output(sc_checkpoint_name(lamsc));
      if (phase == training::Phase::asc && !fs::exists(sc_path))
        fail(ErrorCode::missing_artifact, "asc training requires the SC checkpoint " + sc_path +
                                              " (run: train --phase crossed --variant lamsc)");
      const auto tv = std::chrono::steady_clock::now();
      const std::vector<ImageSample> images =
          lamsc ? semantic_images(ws, originals, attention ? &*attention : nullptr) : originals;
      training::ScModel model =
          phase != training::Phase::crossed && fs::exists(sc_path)
              ? load_sc(sc_path, config)
              : training::make_model(config.codec, config.channel_hidden,
                                     nn::derive_seed(config.seed, lamsc ? kLamscModelTag : kBaselineModelTag));

      std::vector<training::TraceRow> rows;
      Json run{{"variant", vname}};
      Json vphases = Json::array();
      Json freeze = Json::array();
      auto add_phase = [&](const training::PhaseResult& pr) {
        const std::string n = training::to_string(pr.phase);
        auto more = training::trace_rows(pr, n, static_cast<long>(rows.size()), tc.snr_db_train, tc.seed);
        rows.insert(rows.end(), more.begin(), more.end());
        vphases.push_back(n);
        phases_run.push_back(n);
        result.phases_run.push_back(n);
        freeze.push_back({{"phase", n}, {"frozen", freeze_json(pr.freeze)}});
      };

      switch (phase) {
        case training::Phase::channel: {
          std::vector<Tensor> features;
          for (const auto& img : images) features.push_back(codec::encoder_forward(model.codec, img.pixels, nullptr));
          add_phase(training::train_channel_phase(features, tc, model));
          break;
        }
        case training::Phase::semantic: add_phase(training::train_semantic_phase(images, tc, model)); break;
        case training::Phase::crossed: {
          const auto cr = training::crossed_train(images, images, tc, model);
          for (const auto& pr : cr.phases) add_phase(pr);
          Json log = Json::array();
          for (const auto& e : cr.log)
            log.push_back({{"round", e.round},
                           {"module", e.module},
                           {"end_to_end_loss", e.end_to_end_loss},
                           {"semantic_digest", e.semantic_digest},
                           {"channel_digest", e.channel_digest}});
          run["initial_end_to_end_loss"] = cr.initial_loss;
          run["round_end_losses"] = cr.round_end_losses;
          run["rounds_run"] = cr.rounds_run;
          run["converged"] = cr.converged;
          run["round_log"] = log;
          break;
        }
        case training::Phase::asc: {
          std::vector<const nn::ParamSet*> extra;
          if (attention) extra.push_back(&attention->params);
          const auto pr = training::train_asc(images, tc, model, extra);
          add_phase(pr);
          run["final_mask_ratio"] = pr.mask_ratio_trace.back();
          run["final_path_difference"] = pr.aux_trace.back();
          run["feature_elements"] = shape_numel(model.codec.feature_shape(config.image_height, config.image_width));
          break;
        }
        case training::Phase::asi: break;
      }

      const std::string ckpt_path = phase == training::Phase::asc ? ws.output(kAscCheckpoint) : sc_path;
      if (phase == training::Phase::asc)
        save_mask_net(ckpt_path, model, config);
      else
        save_sc(ckpt_path, model, config, vname);
      const std::string csv = ws.output("loss_" + phase_name + "_" + vname + ".csv");
      training::write_trace_csv(csv, rows);
      result.checkpoints.push_back(ckpt_path);
      result.loss_csvs.push_back(csv);
      run["phases_run"] = vphases;
      run["freeze"] = freeze;
      run["checkpoint"] = fs::path(ckpt_path).filename().string();
      run["checkpoint_sha256"] = sha256_file(ckpt_path);
      run["loss_csv"] = fs::path(csv).filename().string();
      run["loss_csv_sha256"] = sha256_file(csv);
      run["duration_s"] = seconds_since(tv);
      runs.push_back(run);
    }
  }
  manifest["phases_run"] = phases_run;
  manifest["runs"] = runs;
  manifest["duration_s"] = seconds_since(t0);
  manifest["config"] = Json::parse(config.to_json());
  result.manifest_path = ws.output("manifest_train_" + phase_name + ".json");
  write_text(result.manifest_path, manifest.dump(2));
  return result;
}

// -- eval -----------------------------------------------------------------------------------------

std::vector<training::TraceRow> collect_traces(const std::string& output_dir) {
  std::vector<std::string> files;
  if (fs::is_directory(output_dir))
    for (const auto& e : fs::directory_iterator(output_dir)) {
      const std::string n = e.path().filename().string();
      if (n.rfind("loss_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path().string());
    }
  std::sort(files.begin(), files.end());
  std::vector<training::TraceRow> out;
  for (const auto& f : files) {
    const std::string tag = fs::path(f).stem().string().substr(5);
    for (auto row : training::read_trace_csv(f)) {
      const auto us = tag.rfind('_');
      const std::string variant = us == std::string::npos ? "" : tag.substr(us + 1);
      row.phase = variant.empty() ? row.phase : variant + " " + row.phase;
      out.push_back(std::move(row));
    }
  }
  return out;
}

EvalResult cmd_eval(const config::RunConfig& config) {
  Workspace ws = Workspace::open(config);
  const auto t0 = std::chrono::steady_clock::now();
  training::ScModel lamsc = load_sc(ws.output(sc_checkpoint_name(true)), config);
  training::ScModel baseline = load_sc(ws.output(sc_checkpoint_name(false)), config);
  const bool have_asc = fs::exists(ws.output(kAscCheckpoint));
  if (have_asc) load_mask_net(ws.output(kAscCheckpoint), lamsc);
  const auto attention = maybe_attention(ws);

  eval::SweepInput in;
  in.originals = load_images(ws, ws.eval_indices);
  in.semantic_aware = semantic_images(ws, in.originals, attention ? &*attention : nullptr);
  in.lamsc = &lamsc;
  in.baseline = &baseline;
  in.lamsc_mask = have_asc && config.eval_use_mask;
  in.kind = config.channel.kind;
  in.snr_list = config.eval_snr_list;
  in.seeds = config.eval_seeds;
  in.bits_per_element = config.bits_per_element;
  in.config_digest = config.digest();
  const auto rows = eval::snr_sweep(in);

  EvalResult r;
  r.rows = rows.size();
  const std::string dir = ws.output("eval");
  r.curves = eval::emit_curves(rows, collect_traces(config.output_dir), dir);

  // Bit accounting on the first held-out image with the mask actually used.
  const ImageSample& first = in.semantic_aware.front();
  const codec::FeatureTensor feat = codec::semantic_encode(first, lamsc.codec);
  const codec::MaskMatrix mask = in.lamsc_mask ? codec::mask_features(feat, lamsc.codec).mask
                                               : codec::full_mask(feat.data.shape());
  const eval::BitReport bits = eval::bit_account(first, feat, mask, config.bits_per_element);
  Json summary{{"example_image", first.source_id}, {"example", Json::parse(eval::bit_report_json(bits))}};
  Json means = Json::array();
  for (const auto& row : rows)
    if (row.seed == rows.front().seed && row.snr_db == rows.front().snr_db)
      means.push_back({{"variant", row.variant},
                       {"elements_original", row.elements_original},
                       {"elements_features", row.elements_features},
                       {"elements_retained", row.elements_retained},
                       {"bits_at_precision", row.bits_at_precision},
                       {"mask_ratio", row.mask_ratio}});
  summary["mean_over_eval_set"] = means;
  r.bit_summary_path = (fs::path(dir) / "bit_summary.json").string();
  write_text(r.bit_summary_path, summary.dump(2));

  r.manifest_path = (fs::path(dir) / "manifest_eval.json").string();
  write_text(r.manifest_path,
             Json{{"command", "eval"},
                  {"config_digest", config.digest()},
                  {"seeds", config.eval_seeds},
                  {"snr_list", config.eval_snr_list},
                  {"eval_images", ws.eval_indices.size()},
                  {"lamsc_mask", in.lamsc_mask},
                  {"integration", attention ? "attention" : "human_select"},
                  {"checkpoints", checkpoint_hashes(ws, {sc_checkpoint_name(true), sc_checkpoint_name(false),
                                                         kAscCheckpoint, kAsiCheckpoint})},
                  {"metrics_sha256", sha256_file(r.curves.csv)},
                  {"duration_s", seconds_since(t0)},
                  {"config", Json::parse(config.to_json())}}
                 .dump(2));
  return r;
}

// -- transmit --------------------------------------------------------------------------------------

TransmitResult cmd_transmit(const config::RunConfig& config, const std::string& image, const std::string& out_dir,
                            const TransmitOptions& options) {
  Workspace ws = Workspace::open(config);
  const auto t0 = std::chrono::steady_clock::now();
  training::ScModel model = load_sc(ws.output(sc_checkpoint_name(true)), config);
  const bool have_asc = fs::exists(ws.output(kAscCheckpoint));
  if (have_asc) load_mask_net(ws.output(kAscCheckpoint), model);
  const auto attention = maybe_attention(ws);
  ensure_dir(out_dir);

  ImageSample img;
  try {
    img = resolve_image(ws, image);
  } catch (const Error& e) {
    rethrow_with_stage(e, "load");
  }
  SemanticView view;
  try {
    view = semantic_view(img, *ws.backend, config, attention ? &*attention : nullptr);
  } catch (const Error& e) {
    rethrow_with_stage(e, "segment");
  }

  channel::ChannelConfig ch = config.channel;
  if (options.snr_db) ch.snr_db = *options.snr_db;
  ch.noise_variance_override = options.noise_variance;
  codec::FeatureTensor features;
  codec::MaskMatrix mask;
  ImageSample recovered;
  try {
    features = codec::semantic_encode(view.semantic_aware, model.codec);
    mask = have_asc && !options.full_mask ? codec::mask_features(features, model.codec).mask
                                          : codec::full_mask(features.data.shape());
  } catch (const Error& e) {
    rethrow_with_stage(e, "encode");
  }
  try {
    const auto symbols = channel::channel_encode(codec::apply_mask(features, mask), model.channel);
    const auto received = channel::transmit(symbols, ch);
    const auto decoded = channel::channel_decode(received, model.channel, features.data.shape(), features.source_shape);
    recovered = codec::semantic_decode(decoded, model.codec);
    recovered.source_id = img.source_id;
  } catch (const Error& e) {
    rethrow_with_stage(e, "channel");
  }

  TransmitResult r;
  try {
    skb::SegmentSet reference;
    reference.source = view.segments.source;
    reference.backend_name = view.segments.backend_name;
    for (std::size_t k = 0; k < view.segments.masks.size(); ++k)
      if (k < view.selection.size() && view.selection[k]) reference.masks.push_back(view.segments.masks[k]);
    r.integrity = skb::verify_recovery(recovered, reference, *ws.backend, config.integrity_threshold);
  } catch (const Error& e) {
    rethrow_with_stage(e, "verify");
  }
  r.bits = eval::bit_account(view.semantic_aware, features, mask, config.bits_per_element);
  r.psnr_vs_semantic_aware = eval::psnr(recovered, view.semantic_aware);

  const fs::path dir(out_dir);
  r.recovered_path = (dir / "recovered.png").string();
  r.semantic_aware_path = (dir / "semantic_aware.png").string();
  r.integrity_path = (dir / "integrity.json").string();
  r.bit_report_path = (dir / "bit_report.json").string();
  r.manifest_path = (dir / "manifest_transmit.json").string();
  io::save_png(r.recovered_path, recovered);
  io::save_png(r.semantic_aware_path, view.semantic_aware);
  Json segs = Json::array();
  for (std::size_t i = 0; i < r.integrity.labels.size(); ++i)
    segs.push_back({{"label", r.integrity.labels[i]},
                    {"iou", r.integrity.per_segment_iou[i]},
                    {"preserved", static_cast<bool>(r.integrity.preserved[i])}});
  write_text(r.integrity_path, Json{{"source", img.source_id},
                                    {"threshold", r.integrity.threshold},
                                    {"preserved_count", r.integrity.preserved_count()},
                                    {"segment_count", r.integrity.labels.size()},
                                    {"segments", segs}}
                                   .dump(2));
  write_text(r.bit_report_path, eval::bit_report_json(r.bits));
  write_text(r.manifest_path,
             Json{{"command", "transmit"},
                  {"source", img.source_id},
                  {"config_digest", config.digest()},
                  {"channel", {{"kind", channel::to_string(ch.kind)}, {"snr_db", ch.snr_db}, {"seed", ch.seed}}},
                  {"noise_variance_override", options.noise_variance ? Json(*options.noise_variance) : Json(nullptr)},
                  {"mask", have_asc && !options.full_mask ? "asc" : "full"},
                  {"integration", attention ? "attention" : "human_select"},
                  {"psnr_vs_semantic_aware_db", r.psnr_vs_semantic_aware},
                  {"checkpoints", checkpoint_hashes(ws, {sc_checkpoint_name(true), kAscCheckpoint, kAsiCheckpoint})},
                  {"duration_s", seconds_since(t0)}}
                 .dump(2));
  return r;
}

// -- report ----------------------------------------------------------------------------------------

ReportResult cmd_report(const config::RunConfig& config) {
  const fs::path eval_dir = fs::path(config.output_dir) / "eval";
  const std::string csv = (eval_dir / "metrics.csv").string();
  if (!fs::exists(csv)) fail(ErrorCode::missing_artifact, "report needs " + csv + " (run eval first)");
  const auto rows = eval::read_metrics_csv(csv);
  if (rows.empty()) fail(ErrorCode::io, csv + " has no rows");
  ReportResult r;
  const std::string dir = (fs::path(config.output_dir) / "report").string();
  r.curves = eval::emit_curves(rows, collect_traces(config.output_dir), dir);

  std::string md = "# Run report\n\nConfig digest: `" + rows.front().config_digest + "`\n\n";
  md += "| variant | SNR (dB) | seed | PSNR (dB) | SSIM | PSNR vs original (dB) | mask ratio | retained elements |\n";
  md += "|---|---|---|---|---|---|---|---|\n";
  char line[256];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "| %s | %g | %llu | %.3f | %.4f | %.3f | %.4f | %llu |\n", row.variant.c_str(),
                  row.snr_db, static_cast<unsigned long long>(row.seed), row.psnr_db, row.ssim,
                  row.psnr_vs_original_db, row.mask_ratio, static_cast<unsigned long long>(row.elements_retained));
    md += line;
  }
  md += "\nPlots: `loss_curve.png`, `psnr_vs_snr.png`, `ssim_vs_snr.png`.\n";
  r.summary_path = (fs::path(dir) / "report.md").string();
  write_text(r.summary_path, md);
  return r;
}

}  // namespace lamsc::app
