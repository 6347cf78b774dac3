// SPDX-License-Identifier: Apache-2.0
#include "lamsc/lamsc.h"

#include <exception>
#include <new>
#include <string>

#include "lamsc/app.hpp"
#include "lamsc/error.hpp"
#include "lamsc/eval.hpp"

struct lamsc_session {
  lamsc::config::RunConfig config;
  std::string config_json;
  std::string digest;
  std::string last_error;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
lamsc_status guarded(lamsc_session* session, F&& body) {
  std::string message;
  lamsc_status status = LAMSC_OK;
  try {
    body();
  } catch (const lamsc::Error& e) {
    status = static_cast<lamsc_status>(e.code());
    message = e.what();
  } catch (const std::bad_alloc&) {
    status = LAMSC_ERR_INTERNAL;
    message = "out of memory";
  } catch (const std::exception& e) {
    status = LAMSC_ERR_INTERNAL;
    message = e.what();
  } catch (...) {
    status = LAMSC_ERR_INTERNAL;
    message = "unknown error";
  }
  if (status != LAMSC_OK) {
    g_last_error = message;
    if (session) session->last_error = message;
  }
  return status;
}

void require(const void* p, const char* what) {
  if (!p) lamsc::fail(lamsc::ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

lamsc::ImageSample wrap(const double* data, int h, int w, int c) {
  require(data, "image data");
  if (h < 1 || w < 1 || c < 1) lamsc::fail(lamsc::ErrorCode::invalid_argument, "image dimensions must be positive");
  lamsc::ImageSample img = lamsc::make_image(h, w, c);
  std::copy_n(data, img.pixels.size(), img.pixels.data());
  return img;
}

}  // namespace

extern "C" {

const char* lamsc_version(void) { return "1.0.0"; }

const char* lamsc_status_string(lamsc_status status) {
  if (status == LAMSC_OK) return "ok";
  if (status < LAMSC_ERR_INVALID_ARGUMENT || status > LAMSC_ERR_INTERNAL) return "unknown status";
  return lamsc::to_string(static_cast<lamsc::ErrorCode>(status));
}

const char* lamsc_last_error(void) { return g_last_error.c_str(); }

lamsc_status lamsc_session_create(const char* config_path, const char* const* overrides, size_t override_count,
                                  lamsc_session** out) {
  return guarded(nullptr, [&] {
    require(config_path, "config_path");
    require(out, "out");
    *out = nullptr;
    std::vector<std::string> ov;
    for (size_t i = 0; i < override_count; ++i) {
      require(overrides[i], "override");
      ov.emplace_back(overrides[i]);
    }
    auto s = std::make_unique<lamsc_session>();
    s->config = lamsc::config::load_config(config_path, ov);
    s->config_json = s->config.to_json();
    s->digest = s->config.digest();
    *out = s.release();
  });
}

void lamsc_session_destroy(lamsc_session* session) { delete session; }

const char* lamsc_session_last_error(const lamsc_session* session) {
  return session ? session->last_error.c_str() : g_last_error.c_str();
}

const char* lamsc_session_config_json(const lamsc_session* session) { return session ? session->config_json.c_str() : ""; }
const char* lamsc_session_config_digest(const lamsc_session* session) { return session ? session->digest.c_str() : ""; }
const char* lamsc_session_output_dir(const lamsc_session* session) {
  return session ? session->config.output_dir.c_str() : "";
}

lamsc_status lamsc_segment(lamsc_session* session, const char* image, const char* out_dir, int human_select,
                           size_t* mask_count) {
  return guarded(session, [&] {
    require(session, "session");
    require(image, "image");
    require(out_dir, "out_dir");
    const auto r = lamsc::app::cmd_segment(session->config, image, out_dir, human_select != 0);
    if (mask_count) *mask_count = r.mask_paths.size();
  });
}

lamsc_status lamsc_train(lamsc_session* session, const char* phase, const char* variant) {
  return guarded(session, [&] {
    require(session, "session");
    require(phase, "phase");
    lamsc::app::cmd_train(session->config, lamsc::training::parse_phase(phase),
                          lamsc::app::parse_variant(variant ? variant : "both"));
  });
}

lamsc_status lamsc_eval(lamsc_session* session, size_t* rows) {
  return guarded(session, [&] {
    require(session, "session");
    const auto r = lamsc::app::cmd_eval(session->config);
    if (rows) *rows = r.rows;
  });
}

lamsc_status lamsc_transmit(lamsc_session* session, const char* image, const char* out_dir,
                            const lamsc_transmit_options* options, lamsc_transmit_summary* summary) {
  return guarded(session, [&] {
    require(session, "session");
    require(image, "image");
    require(out_dir, "out_dir");
    lamsc::app::TransmitOptions opt;
    if (options) {
      if (options->has_snr_db) opt.snr_db = options->snr_db;
      if (options->has_noise_variance) opt.noise_variance = options->noise_variance;
      opt.full_mask = options->full_mask != 0;
    }
    const auto r = lamsc::app::cmd_transmit(session->config, image, out_dir, opt);
    if (summary) {
      summary->segments = r.integrity.labels.size();
      summary->preserved = r.integrity.preserved_count();
      summary->psnr_vs_semantic_aware_db = r.psnr_vs_semantic_aware;
      summary->original_elements = r.bits.original_elements;
      summary->feature_elements = r.bits.feature_elements;
      summary->retained_elements = r.bits.retained_elements;
      summary->retained_bits = r.bits.retained_bits;
    }
  });
}

lamsc_status lamsc_report(lamsc_session* session) {
  return guarded(session, [&] {
    require(session, "session");
    lamsc::app::cmd_report(session->config);
  });
}

lamsc_status lamsc_make_dataset(const char* root, int count, int size, uint64_t seed) {
  return guarded(nullptr, [&] {
    require(root, "root");
    lamsc::data::generate_synthetic(root, count, size, seed);
  });
}

lamsc_status lamsc_psnr(const double* a, const double* b, int height, int width, int channels, double* out) {
  return guarded(nullptr, [&] {
    require(out, "out");
    *out = lamsc::eval::psnr(wrap(a, height, width, channels), wrap(b, height, width, channels));
  });
}

lamsc_status lamsc_ssim(const double* a, const double* b, int height, int width, int channels, double* out) {
  return guarded(nullptr, [&] {
    require(out, "out");
    *out = lamsc::eval::ssim(wrap(a, height, width, channels), wrap(b, height, width, channels));
  });
}

lamsc_status lamsc_bit_account(int height, int width, int channels, int feature_h, int feature_w, int feature_c,
                               const uint8_t* mask, int bits_per_element, lamsc_bit_report* out) {
  return guarded(nullptr, [&] {
    require(mask, "mask");
    require(out, "out");
    if (height < 1 || width < 1 || channels < 1 || feature_h < 1 || feature_w < 1 || feature_c < 1)
      lamsc::fail(lamsc::ErrorCode::invalid_argument, "dimensions must be positive");
    lamsc::ImageSample img;
    img.pixels = lamsc::Tensor({height, width, channels});
    lamsc::codec::FeatureTensor feat;
    feat.data = lamsc::Tensor({feature_h, feature_w, feature_c});
    lamsc::codec::MaskMatrix m;
    m.shape = feat.data.shape();
    m.bits.assign(mask, mask + feat.data.size());
    for (auto b : m.bits) {
      if (b > 1) lamsc::fail(lamsc::ErrorCode::invalid_argument, "mask entries must be 0 or 1");
      m.retained_count += b;
    }
    const auto r = lamsc::eval::bit_account(img, feat, m, bits_per_element);
    *out = lamsc_bit_report{r.original_elements, r.feature_elements, r.retained_elements, r.bits_per_element,
                            r.mask_side_info_bits, r.original_bits, r.feature_bits, r.retained_bits,
                            r.retained_bits_with_side_info};
  });
}

}  // extern "C"
