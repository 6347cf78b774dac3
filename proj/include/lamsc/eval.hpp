// SPDX-License-Identifier: Apache-2.0
//
// Image-quality metrics, transmission-size accounting and SNR sweeps.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lamsc/codec.hpp"
#include "lamsc/image.hpp"
#include "lamsc/training.hpp"

namespace lamsc::eval {

inline constexpr double kPsnrCap = 100.0;

double psnr(const ImageSample& a, const ImageSample& b);
// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1) over
// valid windows, averaged over channels.
double ssim(const ImageSample& a, const ImageSample& b);

struct BitReport {
  std::uint64_t original_elements = 0;
  std::uint64_t feature_elements = 0;
  std::uint64_t retained_elements = 0;
  int bits_per_element = 8;
  std::uint64_t mask_side_info_bits = 0;  // one bit per feature entry
  std::uint64_t original_bits = 0;
  std::uint64_t feature_bits = 0;
  std::uint64_t retained_bits = 0;
  std::uint64_t retained_bits_with_side_info = 0;
};

BitReport bit_account(const ImageSample& image, const codec::FeatureTensor& features, const codec::MaskMatrix& mask,
                      int bits_per_element = 8);
std::string bit_report_json(const BitReport& report);

struct MetricsRow {
  std::string variant;  // "baseline" or "lamsc"
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double psnr_vs_original_db = 0.0;
  double ssim_vs_original = 0.0;
  double loss = 0.0;
  double mask_ratio = 1.0;
  std::uint64_t elements_original = 0;
  std::uint64_t elements_features = 0;
  std::uint64_t elements_retained = 0;
  std::uint64_t bits_at_precision = 0;
  std::string config_digest;

  bool operator==(const MetricsRow&) const = default;
};

struct SweepInput {
  std::vector<ImageSample> originals;
  // LAM-SC sources (segmented and integrated), index-aligned with originals.
  std::vector<ImageSample> semantic_aware;
  const training::ScModel* lamsc = nullptr;
  const training::ScModel* baseline = nullptr;
  bool lamsc_mask = true;
  channel::ChannelKind kind = channel::ChannelKind::awgn;
  std::vector<double> snr_list;
  std::vector<std::uint64_t> seeds;
  int bits_per_element = 8;
  std::string config_digest;
  std::optional<double> noise_variance_override;
};

// Rows ordered by (snr, seed, variant).
std::vector<MetricsRow> snr_sweep(const SweepInput& input);

// Per-image scores for one variant at one SNR and seed.
struct ImageScore {
  double psnr_db, ssim, psnr_vs_original_db, ssim_vs_original, mask_ratio;
  std::uint64_t retained;
};
std::vector<ImageScore> score_images(const SweepInput& input, bool lamsc, double snr_db, std::uint64_t seed);

inline constexpr const char* kMetricsSchema = "lamsc-metrics-v1";
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

struct CurvePaths {
  std::string csv, loss_plot, psnr_plot, ssim_plot;
};
// Writes metrics.csv plus loss/PSNR/SSIM plots. `trace` may be empty.
CurvePaths emit_curves(const std::vector<MetricsRow>& table, const std::vector<training::TraceRow>& trace,
                       const std::string& output_dir);

}  // namespace lamsc::eval
