// SPDX-License-Identifier: Apache-2.0
// Command-line front end; talks to the library only through lamsc.h.
#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "lamsc/lamsc.h"

namespace {

using SessionPtr = std::unique_ptr<lamsc_session, decltype(&lamsc_session_destroy)>;

int report_failure(lamsc_status status, const char* verb, const char* message) {
  std::fprintf(stderr, "lamsc %s: %s: %s\n", verb, lamsc_status_string(status), message);
  return static_cast<int>(status);
}

SessionPtr open_session(const std::string& config, const std::vector<std::string>& overrides, int& exit_code) {
  std::vector<const char*> raw;
  for (const auto& o : overrides) raw.push_back(o.c_str());
  lamsc_session* s = nullptr;
  const lamsc_status st = lamsc_session_create(config.c_str(), raw.data(), raw.size(), &s);
  if (st != LAMSC_OK) exit_code = report_failure(st, "config", lamsc_last_error());
  return SessionPtr(s, &lamsc_session_destroy);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LAM-SC semantic-communication simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lamsc_version()));

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override a config field: section.key=value");
  };

  std::string image, out_dir, phase, variant = "both";
  bool human = false, full_mask = false;
  double snr = 0.0, noise_var = 0.0;

  auto* seg = app.add_subcommand("segment", "segment an image and write masks plus a semantic-aware preview");
  add_common(seg);
  seg->add_option("-i,--image", image, "image file or dataset stem")->required();
  seg->add_option("-o,--out", out_dir, "output directory")->required();
  seg->add_flag("--human-select", human, "integrate with the interest list instead of trained attention");

  auto* train = app.add_subcommand("train", "run one training phase");
  add_common(train);
  train->add_option("-p,--phase", phase, "asi | channel | semantic | crossed | asc")
      ->required()
      ->check(CLI::IsMember({"asi", "channel", "semantic", "crossed", "asc"}));
  train->add_option("--variant", variant, "lamsc | baseline | both")->check(CLI::IsMember({"lamsc", "baseline", "both"}));

  auto* ev = app.add_subcommand("eval", "SNR sweep over the held-out images; writes CSV and plots");
  add_common(ev);

  auto* tx = app.add_subcommand("transmit", "send one image end to end and verify semantic integrity");
  add_common(tx);
  tx->add_option("-i,--image", image, "image file or dataset stem")->required();
  tx->add_option("-o,--out", out_dir, "output directory")->required();
  auto* snr_opt = tx->add_option("--snr", snr, "channel SNR in dB (default: channel.snr_db)");
  auto* var_opt = tx->add_option("--noise-variance", noise_var, "force the noise variance (0 = noiseless)");
  tx->add_flag("--full-mask", full_mask, "send every feature (ignore the ASC mask)");

  auto* rep = app.add_subcommand("report", "re-render curves and a markdown summary from the eval CSV");
  add_common(rep);

  int count = 220, size = 32;
  std::uint64_t seed = 1;
  auto* mk = app.add_subcommand("make-dataset", "write a synthetic annotated dataset");
  mk->add_option("-o,--out", out_dir, "dataset root")->required();
  mk->add_option("-n,--count", count, "number of images")->check(CLI::PositiveNumber);
  mk->add_option("--size", size, "image side in pixels")->check(CLI::Range(8, 4096));
  mk->add_option("--seed", seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  if (mk->parsed()) {
    const lamsc_status st = lamsc_make_dataset(out_dir.c_str(), count, size, seed);
    return st == LAMSC_OK ? 0 : report_failure(st, "make-dataset", lamsc_last_error());
  }

  int exit_code = 0;
  SessionPtr session = open_session(config_path, overrides, exit_code);
  if (!session) return exit_code;
  lamsc_session* s = session.get();

  lamsc_status st = LAMSC_OK;
  const char* verb = "";
  if (seg->parsed()) {
    verb = "segment";
    std::size_t n = 0;
    st = lamsc_segment(s, image.c_str(), out_dir.c_str(), human ? 1 : 0, &n);
    if (st == LAMSC_OK) std::printf("wrote %zu masks to %s\n", n, out_dir.c_str());
  } else if (train->parsed()) {
    verb = "train";
    st = lamsc_train(s, phase.c_str(), variant.c_str());
    if (st == LAMSC_OK) std::printf("phase %s done; artifacts in %s\n", phase.c_str(), lamsc_session_output_dir(s));
  } else if (ev->parsed()) {
    verb = "eval";
    std::size_t rows = 0;
    st = lamsc_eval(s, &rows);
    if (st == LAMSC_OK) std::printf("wrote %zu metric rows to %s/eval\n", rows, lamsc_session_output_dir(s));
  } else if (tx->parsed()) {
    verb = "transmit";
    lamsc_transmit_options opt{};
    opt.has_snr_db = snr_opt->count() > 0;
    opt.snr_db = snr;
    opt.has_noise_variance = var_opt->count() > 0;
    opt.noise_variance = noise_var;
    opt.full_mask = full_mask ? 1 : 0;
    lamsc_transmit_summary sum{};
    st = lamsc_transmit(s, image.c_str(), out_dir.c_str(), &opt, &sum);
    if (st == LAMSC_OK)
      std::printf("preserved %zu/%zu segments, PSNR %.2f dB, %llu/%llu feature elements sent\n", sum.preserved,
                  sum.segments, sum.psnr_vs_semantic_aware_db, static_cast<unsigned long long>(sum.retained_elements),
                  static_cast<unsigned long long>(sum.feature_elements));
  } else if (rep->parsed()) {
    verb = "report";
    st = lamsc_report(s);
    if (st == LAMSC_OK) std::printf("report written to %s/report\n", lamsc_session_output_dir(s));
  }
  return st == LAMSC_OK ? 0 : report_failure(st, verb, lamsc_session_last_error(s));
}
