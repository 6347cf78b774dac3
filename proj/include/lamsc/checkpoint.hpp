// SPDX-License-Identifier: Apache-2.0
//
// Versioned parameter container shared by every trainable module.
//
// Layout (little-endian):
//   "LAMSCKPT" | u32 version | str config_digest | str metadata_json |
//   u32 count | count x { str name | u32 rank | i32 dims[rank] | f64 data[] }
// where str is u32 length + bytes.
#pragma once

#include <string>
#include <vector>

#include "lamsc/nn.hpp"

namespace lamsc::ckpt {

inline constexpr unsigned kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::string config_digest;
  std::string metadata_json = "{}";
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  bool has_module(const std::string& module) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Arrays are stored as "<module>/<param name>".
void add_params(Checkpoint& checkpoint, const nn::ParamSet& params);
// Throws shape_mismatch when a stored array disagrees with `params`, and
// missing_artifact when the module is absent.
void load_params(const Checkpoint& checkpoint, nn::ParamSet& params);

}  // namespace lamsc::ckpt
