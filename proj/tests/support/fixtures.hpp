// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lamsc/dataset.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, unique per process and name.
inline std::string scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lamsc_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// Synthetic annotated dataset shared by the tests of one process.
inline std::string dataset(int count = 12, int size = 32, std::uint64_t seed = 5) {
  const fs::path p = fs::temp_directory_path() / ("lamsc_test_" + std::to_string(::getpid())) /
                     ("data_" + std::to_string(count) + "_" + std::to_string(size) + "_" + std::to_string(seed));
  if (!fs::exists(p / "ImageSets")) lamsc::data::generate_synthetic(p.string(), count, size, seed);
  return p.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace fixtures
