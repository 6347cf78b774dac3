// SPDX-License-Identifier: Apache-2.0
#include "lamsc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lamsc/error.hpp"

namespace lamsc::ckpt {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'M', 'S', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::ifstream& is;
  const std::string& path;

  template <class T>
  T get() {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::io, "truncated checkpoint " + path);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 28)) fail(ErrorCode::io, "corrupt checkpoint string length in " + path);
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) fail(ErrorCode::io, "truncated checkpoint " + path);
    return s;
  }
};

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

bool Checkpoint::has_module(const std::string& module) const {
  const std::string prefix = module + "/";
  for (const auto& a : arrays)
    if (a.name.compare(0, prefix.size(), prefix) == 0) return true;
  return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::io, "cannot write checkpoint " + path);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put_str(os, checkpoint.config_digest);
    put_str(os, checkpoint.metadata_json);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(checkpoint.arrays.size()));
    for (const auto& a : checkpoint.arrays) {
      put_str(os, a.name);
      put<std::uint32_t>(os, static_cast<std::uint32_t>(a.value.rank()));
      for (int d : a.value.shape()) put<std::int32_t>(os, d);
      os.write(reinterpret_cast<const char*>(a.value.data()), static_cast<std::streamsize>(a.value.size() * sizeof(double)));
    }
    if (!os) fail(ErrorCode::io, "failed writing checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::missing_artifact, "checkpoint not found: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) fail(ErrorCode::io, path + " is not a checkpoint file");
  Reader r{is, path};
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(ErrorCode::io, "unsupported checkpoint version " + std::to_string(version) + " in " + path);
  Checkpoint c;
  c.config_digest = r.str();
  c.metadata_json = r.str();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) fail(ErrorCode::io, "corrupt checkpoint rank in " + path);
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::int32_t>();
    a.value = Tensor(shape);
    if (!is.read(reinterpret_cast<char*>(a.value.data()), static_cast<std::streamsize>(a.value.size() * sizeof(double))))
      fail(ErrorCode::io, "truncated checkpoint " + path);
    c.arrays.push_back(std::move(a));
  }
  return c;
}

void add_params(Checkpoint& checkpoint, const nn::ParamSet& params) {
  for (const auto& p : params.params()) checkpoint.arrays.push_back(NamedArray{params.module() + "/" + p.name, p.value});
}

void load_params(const Checkpoint& checkpoint, nn::ParamSet& params) {
  if (!checkpoint.has_module(params.module()))
    fail(ErrorCode::missing_artifact, "checkpoint has no parameters for module " + params.module());
  for (auto& p : params.params()) {
    const NamedArray* a = checkpoint.find(params.module() + "/" + p.name);
    if (!a) fail(ErrorCode::shape_mismatch, "checkpoint/config shape mismatch: missing " + params.module() + "/" + p.name);
    if (a->value.shape() != p.value.shape())
      fail(ErrorCode::shape_mismatch, "checkpoint/config shape mismatch for " + params.module() + "/" + p.name + ": " +
                                          shape_str(a->value.shape()) + " in checkpoint, " + shape_str(p.value.shape()) +
                                          " from config");
    p.value = a->value;
  }
}

}  // namespace lamsc::ckpt
