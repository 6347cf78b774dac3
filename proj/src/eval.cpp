// SPDX-License-Identifier: Apache-2.0
#include "lamsc/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lamsc/error.hpp"
#include "lamsc/plot.hpp"

namespace lamsc::eval {

namespace {

void check_pair(const ImageSample& a, const ImageSample& b, const char* what) {
  if (a.pixels.shape() != b.pixels.shape())
    fail(ErrorCode::shape_mismatch, std::string(what) + ": image shapes differ (" + shape_str(a.pixels.shape()) +
                                        " vs " + shape_str(b.pixels.shape()) + ")");
  validate_image(a);
  validate_image(b);
}

constexpr int kWin = 11;

std::array<double, kWin> gaussian_window() {
  std::array<double, kWin> w{};
  double s = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= s;
  return w;
}

// Separable valid-mode filter of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::array<double, kWin>& g) {
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

std::string fmt(double v) { return training::format_double(v); }

}  // namespace

double psnr(const ImageSample& a, const ImageSample& b) {
  check_pair(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.pixels.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageSample& a, const ImageSample& b) {
  check_pair(a, b, "ssim");
  const int h = a.height(), w = a.width(), c = a.channels();
  if (h < kWin || w < kWin)
    fail(ErrorCode::precondition, "ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                                      " is smaller than the 11x11 window");
  const auto g = gaussian_window();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = a.pixels[i * static_cast<std::size_t>(c) + static_cast<std::size_t>(ch)];
      pb[i] = b.pixels[i * static_cast<std::size_t>(c) + static_cast<std::size_t>(ch)];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto ma = filter_valid(pa, h, w, g), mb = filter_valid(pb, h, w, g);
    const auto ea = filter_valid(aa, h, w, g), eb = filter_valid(bb, h, w, g), eab = filter_valid(ab, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = ea[i] - ma[i] * ma[i], vb = eb[i] - mb[i] * mb[i], cov = eab[i] - ma[i] * mb[i];
      acc += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    total += acc / static_cast<double>(ma.size());
  }
  return total / c;
}

BitReport bit_account(const ImageSample& image, const codec::FeatureTensor& features, const codec::MaskMatrix& mask,
                      int bits_per_element) {
  if (bits_per_element < 1) fail(ErrorCode::invalid_argument, "bits_per_element must be >= 1");
  if (mask.shape != features.data.shape())
    fail(ErrorCode::shape_mismatch, "bit_account: mask shape " + shape_str(mask.shape) + " does not match features " +
                                        shape_str(features.data.shape()));
  BitReport r;
  r.original_elements = image.pixels.size();
  r.feature_elements = features.data.size();
  r.retained_elements = static_cast<std::uint64_t>(std::count(mask.bits.begin(), mask.bits.end(), 1));
  r.bits_per_element = bits_per_element;
  r.mask_side_info_bits = r.feature_elements;
  const auto bpe = static_cast<std::uint64_t>(bits_per_element);
  r.original_bits = r.original_elements * bpe;
  r.feature_bits = r.feature_elements * bpe;
  r.retained_bits = r.retained_elements * bpe;
  r.retained_bits_with_side_info = r.retained_bits + r.mask_side_info_bits;
  return r;
}

std::string bit_report_json(const BitReport& r) {
  nlohmann::ordered_json j;
  j["original_elements"] = r.original_elements;
  j["feature_elements"] = r.feature_elements;
  j["retained_elements"] = r.retained_elements;
  j["bits_per_element"] = r.bits_per_element;
  j["mask_side_info_bits"] = r.mask_side_info_bits;
  j["original_bits"] = r.original_bits;
  j["feature_bits"] = r.feature_bits;
  j["retained_bits"] = r.retained_bits;
  j["retained_bits_with_side_info"] = r.retained_bits_with_side_info;
  return j.dump(2);
}

// -- sweep ---------------------------------------------------------------------------

std::vector<ImageScore> score_images(const SweepInput& in, bool lamsc, double snr_db, std::uint64_t seed) {
  const training::ScModel* model = lamsc ? in.lamsc : in.baseline;
  if (!model) fail(ErrorCode::missing_artifact, lamsc ? "LAM-SC checkpoint not loaded" : "baseline checkpoint not loaded");
  std::vector<ImageScore> out;
  out.reserve(in.originals.size());
  for (std::size_t i = 0; i < in.originals.size(); ++i) {
    channel::ChannelConfig cfg;
    cfg.kind = in.kind;
    cfg.snr_db = snr_db;
    // Both variants see the same noise stream for a given image.
    cfg.seed = nn::derive_seed(seed, i, 0xE7A1);
    cfg.noise_variance_override = in.noise_variance_override;
    const ImageSample& source = lamsc ? in.semantic_aware[i] : in.originals[i];
    const auto t = training::run_sc(source, *model, cfg, lamsc && in.lamsc_mask);
    ImageScore s{};
    s.psnr_db = psnr(t.recovered, source);
    s.ssim = ssim(t.recovered, source);
    s.psnr_vs_original_db = lamsc ? psnr(t.recovered, in.originals[i]) : s.psnr_db;
    s.ssim_vs_original = lamsc ? ssim(t.recovered, in.originals[i]) : s.ssim;
    s.mask_ratio = codec::mask_ratio(t.mask);
    s.retained = t.mask.retained_count;
    out.push_back(s);
  }
  return out;
}

std::vector<MetricsRow> snr_sweep(const SweepInput& in) {
  if (in.snr_list.empty()) fail(ErrorCode::invalid_argument, "snr_list must not be empty");
  if (in.seeds.empty()) fail(ErrorCode::invalid_argument, "seed list must not be empty");
  if (in.originals.empty()) fail(ErrorCode::invalid_argument, "sweep dataset is empty");
  if (in.semantic_aware.size() != in.originals.size())
    fail(ErrorCode::shape_mismatch, "semantic-aware images must align with the originals");
  if (!in.lamsc) fail(ErrorCode::missing_artifact, "LAM-SC checkpoint not loaded");
  if (!in.baseline) fail(ErrorCode::missing_artifact, "baseline checkpoint not loaded");
  for (double s : in.snr_list)
    if (std::isnan(s)) fail(ErrorCode::invalid_argument, "snr_list contains NaN");

  const ImageSample& first = in.originals.front();
  const auto elements_original = static_cast<std::uint64_t>(first.pixels.size());
  const auto elements_features = static_cast<std::uint64_t>(
      shape_numel(in.lamsc->codec.feature_shape(first.height(), first.width())));

  std::vector<MetricsRow> rows;
  for (double snr : in.snr_list)
    for (std::uint64_t seed : in.seeds)
      for (const bool lamsc : {false, true}) {
        const auto scores = score_images(in, lamsc, snr, seed);
        MetricsRow r;
        r.variant = lamsc ? "lamsc" : "baseline";
        r.snr_db = snr;
        r.seed = seed;
        double retained = 0.0, mse = 0.0;
        r.mask_ratio = 0.0;
        for (const auto& s : scores) {
          r.psnr_db += s.psnr_db;
          r.ssim += s.ssim;
          r.psnr_vs_original_db += s.psnr_vs_original_db;
          r.ssim_vs_original += s.ssim_vs_original;
          retained += static_cast<double>(s.retained);
          r.mask_ratio += s.mask_ratio;
          mse += std::pow(10.0, -s.psnr_db / 10.0);
        }
        const double n = static_cast<double>(scores.size());
        r.psnr_db /= n;
        r.ssim /= n;
        r.psnr_vs_original_db /= n;
        r.ssim_vs_original /= n;
        r.mask_ratio /= n;
        r.loss = mse / n;
        r.elements_original = elements_original;
        r.elements_features = elements_features;
        r.elements_retained = static_cast<std::uint64_t>(std::llround(retained / n));
        r.bits_at_precision = r.elements_retained * static_cast<std::uint64_t>(in.bits_per_element);
        r.config_digest = in.config_digest;
        rows.push_back(std::move(r));
      }
  return rows;
}

// -- CSV --------------------------------------------------------------------------------

namespace {

constexpr const char* kHeader =
    "schema,variant,snr_db,seed,psnr_db,ssim,psnr_vs_original_db,ssim_vs_original,loss,mask_ratio,"
    "elements_original,elements_features,elements_retained,bits_at_precision,config_digest";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << kHeader << '\n';
  for (const auto& r : rows)
    out << kMetricsSchema << ',' << r.variant << ',' << fmt(r.snr_db) << ',' << r.seed << ',' << fmt(r.psnr_db) << ','
        << fmt(r.ssim) << ',' << fmt(r.psnr_vs_original_db) << ',' << fmt(r.ssim_vs_original) << ',' << fmt(r.loss)
        << ',' << fmt(r.mask_ratio) << ',' << r.elements_original << ',' << r.elements_features << ','
        << r.elements_retained << ',' << r.bits_at_precision << ',' << r.config_digest << '\n';
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) fail(ErrorCode::io, path + ": unexpected metrics CSV header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 15 || c[0] != kMetricsSchema) fail(ErrorCode::io, path + ": malformed row '" + line + "'");
    try {
      MetricsRow r;
      r.variant = c[1];
      r.snr_db = std::stod(c[2]);
      r.seed = std::stoull(c[3]);
      r.psnr_db = std::stod(c[4]);
      r.ssim = std::stod(c[5]);
      r.psnr_vs_original_db = std::stod(c[6]);
      r.ssim_vs_original = std::stod(c[7]);
      r.loss = std::stod(c[8]);
      r.mask_ratio = std::stod(c[9]);
      r.elements_original = std::stoull(c[10]);
      r.elements_features = std::stoull(c[11]);
      r.elements_retained = std::stoull(c[12]);
      r.bits_at_precision = std::stoull(c[13]);
      r.config_digest = c[14];
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      fail(ErrorCode::io, path + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

CurvePaths emit_curves(const std::vector<MetricsRow>& table, const std::vector<training::TraceRow>& trace,
                       const std::string& output_dir) {
  if (table.empty()) fail(ErrorCode::invalid_argument, "emit_curves needs a nonempty table");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec || !fs::is_directory(output_dir)) fail(ErrorCode::io, "cannot create output directory " + output_dir);
  const fs::path dir(output_dir);
  CurvePaths paths{(dir / "metrics.csv").string(), (dir / "loss_curve.png").string(),
                   (dir / "psnr_vs_snr.png").string(), (dir / "ssim_vs_snr.png").string()};
  write_metrics_csv(paths.csv, table);

  std::set<std::uint64_t> seeds;
  for (const auto& r : table) seeds.insert(r.seed);
  std::string seed_text;
  for (auto s : seeds) seed_text += (seed_text.empty() ? "" : " ") + std::to_string(s);
  const std::map<std::string, std::string> meta{{"config_digest", table.front().config_digest}, {"seeds", seed_text}};

  plot::PlotSpec loss{"Training loss", "step (evaluation pass)", "loss", {}, meta};
  for (const auto& row : trace) {
    auto it = std::find_if(loss.series.begin(), loss.series.end(), [&](const auto& s) { return s.label == row.phase; });
    if (it == loss.series.end()) {
      loss.series.push_back({row.phase, {}, {}});
      it = std::prev(loss.series.end());
    }
    it->x.push_back(static_cast<double>(row.step));
    it->y.push_back(row.loss);
  }
  plot::write_line_plot(paths.loss_plot, loss);

  // Mean over seeds per (variant, snr), in first-appearance order.
  auto curve = [&](const std::string& title, const std::string& ylabel, double MetricsRow::*field) {
    plot::PlotSpec spec{title, "SNR (dB)", ylabel, {}, meta};
    for (const char* variant : {"lamsc", "baseline"}) {
      std::vector<double> snrs;
      std::map<double, std::pair<double, int>> acc;
      for (const auto& r : table) {
        if (r.variant != variant) continue;
        if (!acc.count(r.snr_db)) snrs.push_back(r.snr_db);
        auto& a = acc[r.snr_db];
        a.first += r.*field;
        a.second += 1;
      }
      if (snrs.empty()) continue;
      std::sort(snrs.begin(), snrs.end());
      plot::Series s{variant == std::string("lamsc") ? "LAM-SC" : "SC baseline", {}, {}};
      for (double x : snrs) {
        s.x.push_back(x);
        s.y.push_back(acc[x].first / acc[x].second);
      }
      spec.series.push_back(std::move(s));
    }
    return spec;
  };
  plot::write_line_plot(paths.psnr_plot, curve("PSNR vs SNR", "PSNR (dB)", &MetricsRow::psnr_db));
  plot::write_line_plot(paths.ssim_plot, curve("SSIM vs SNR", "SSIM", &MetricsRow::ssim));
  return paths;
}

}  // namespace lamsc::eval
