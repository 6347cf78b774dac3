// SPDX-License-Identifier: Apache-2.0
//
// Command implementations shared by the C API and the CLI. Each command reads
// a RunConfig, works under config.output_dir and returns the artifact paths it
// wrote.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lamsc/asi.hpp"
#include "lamsc/config.hpp"
#include "lamsc/dataset.hpp"
#include "lamsc/eval.hpp"
#include "lamsc/skb.hpp"
#include "lamsc/training.hpp"

namespace lamsc::app {

inline constexpr const char* kAsiCheckpoint = "asi.ckpt";
inline constexpr const char* kAscCheckpoint = "asc.ckpt";
std::string sc_checkpoint_name(bool lamsc);

enum class Variant { lamsc, baseline, both };
Variant parse_variant(const std::string& name);

// Dataset split: the last eval_images entries are held out; training uses up
// to max_images of the rest (everything when the dataset is too small).
struct Workspace {
  config::RunConfig config;
  data::Dataset dataset;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> eval_indices;
  std::unique_ptr<skb::Backend> backend;

  static Workspace open(const config::RunConfig& config);
  std::string output(const std::string& name) const;
};

std::unique_ptr<skb::Backend> make_backend(const config::RunConfig& config, const data::Dataset* dataset,
                                           const std::string& work_dir);

// Segment -> stack -> integrate (trained attention when given, otherwise the
// interest-list selection).
struct SemanticView {
  skb::SegmentSet segments;
  asi::SegmentStack stack;
  std::vector<std::uint8_t> selection;
  ImageSample semantic_aware;
};
SemanticView semantic_view(const ImageSample& image, skb::Backend& backend, const config::RunConfig& config,
                           const asi::AttentionParams* attention);

// -- checkpoints ------------------------------------------------------------------------

void save_sc(const std::string& path, const training::ScModel& model, const config::RunConfig& config,
             const std::string& variant);
training::ScModel load_sc(const std::string& path, const config::RunConfig& config);
void save_attention(const std::string& path, const asi::AttentionParams& params, const config::RunConfig& config);
asi::AttentionParams load_attention(const std::string& path, const config::RunConfig& config);
void save_mask_net(const std::string& path, const training::ScModel& model, const config::RunConfig& config);
void load_mask_net(const std::string& path, training::ScModel& model);

// -- commands -----------------------------------------------------------------------------

struct SegmentResult {
  std::vector<std::string> mask_paths;
  std::string preview_path;
  std::string manifest_path;
};
// `image` is a file path or a dataset stem.
SegmentResult cmd_segment(const config::RunConfig& config, const std::string& image, const std::string& out_dir,
                          bool human_selection);

struct TrainResult {
  std::vector<std::string> phases_run;
  std::vector<std::string> checkpoints;
  std::vector<std::string> loss_csvs;
  std::string manifest_path;
};
TrainResult cmd_train(const config::RunConfig& config, training::Phase phase, Variant variant);

struct EvalResult {
  eval::CurvePaths curves;
  std::string bit_summary_path;
  std::string manifest_path;
  std::size_t rows = 0;
};
EvalResult cmd_eval(const config::RunConfig& config);

struct TransmitOptions {
  std::optional<double> snr_db;
  std::optional<double> noise_variance;
  bool full_mask = false;
};
struct TransmitResult {
  std::string recovered_path, semantic_aware_path, integrity_path, bit_report_path, manifest_path;
  skb::IntegrityReport integrity;
  eval::BitReport bits;
  double psnr_vs_semantic_aware = 0.0;
};
TransmitResult cmd_transmit(const config::RunConfig& config, const std::string& image, const std::string& out_dir,
                            const TransmitOptions& options = {});

struct ReportResult {
  eval::CurvePaths curves;
  std::string summary_path;
};
ReportResult cmd_report(const config::RunConfig& config);

// Every loss_*.csv under the output directory, phases prefixed by file tag.
std::vector<training::TraceRow> collect_traces(const std::string& output_dir);

}  // namespace lamsc::app
