// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON file, validated against a fixed schema. Keys
// not present in the schema are rejected. Scalar fields may be overridden
// with dotted "section.key=value" strings; LAMSC_DATASET_ROOT replaces
// dataset_dir.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lamsc/asi.hpp"
#include "lamsc/channel.hpp"
#include "lamsc/codec.hpp"
#include "lamsc/skb.hpp"
#include "lamsc/training.hpp"

namespace lamsc::config {

inline constexpr const char* kDatasetRootEnv = "LAMSC_DATASET_ROOT";

struct RunConfig {
  std::string dataset_dir;
  int image_height = 32;
  int image_width = 32;
  skb::BackendKind backend = skb::BackendKind::oracle;
  std::string adapter_command;
  int k_max = 4;
  std::vector<std::string> interest{"person", "car"};
  double integrity_threshold = skb::kDefaultIntegrityThreshold;
  double oracle_tolerance = skb::kDefaultOracleTolerance;
  int max_images = 200;   // training images
  int eval_images = 20;   // held-out images for eval and transmit

  codec::CodecArch codec;
  int channel_hidden = 128;
  channel::ChannelConfig channel;
  asi::AsiHyper asi;
  training::TrainConfig train;

  std::vector<double> eval_snr_list{0, 5, 10, 15, 20};
  std::vector<std::uint64_t> eval_seeds{1};
  bool eval_use_mask = true;

  int bits_per_element = 8;
  std::string output_dir = "runs/desk";
  std::uint64_t seed = 1;

  // Canonical JSON (schema order, every field present).
  std::string to_json() const;
  // SHA-256 of the canonical JSON without output_dir.
  std::string digest() const;
};

// Parses `text` (JSON) on top of the defaults, then applies the dataset-root
// environment override and `overrides`. Validates the result.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                       bool require_dataset = true);
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                      bool require_dataset = true);
void validate(const RunConfig& config, bool require_dataset = true);

}  // namespace lamsc::config
