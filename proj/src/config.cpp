// SPDX-License-Identifier: Apache-2.0
#include "lamsc/config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lamsc/error.hpp"
#include "lamsc/hash.hpp"

namespace lamsc::config {

using Json = nlohmann::ordered_json;

namespace {

Json to_value(const RunConfig& c) {
  Json j;
  j["dataset_dir"] = c.dataset_dir;
  j["image_size"] = {c.image_height, c.image_width};
  j["backend"] = skb::to_string(c.backend);
  j["adapter_command"] = c.adapter_command;
  j["k_max"] = c.k_max;
  j["interest"] = c.interest;
  j["integrity_threshold"] = c.integrity_threshold;
  j["oracle_tolerance"] = c.oracle_tolerance;
  j["max_images"] = c.max_images;
  j["eval_images"] = c.eval_images;
  j["codec"] = {{"width1", c.codec.width1},
                {"width2", c.codec.width2},
                {"kernel", c.codec.kernel},
                {"padding", c.codec.padding == nn::Padding::same ? "same" : "valid"},
                {"pool", c.codec.pool},
                {"pool_floor", c.codec.pool_floor},
                {"mask_hidden", c.codec.mask_hidden},
                {"channel_hidden", c.channel_hidden}};
  j["channel"] = {{"kind", channel::to_string(c.channel.kind)}, {"snr_db", c.channel.snr_db}, {"seed", c.channel.seed}};
  j["asi"] = {{"lr", c.asi.lr}, {"epochs", c.asi.epochs}, {"batch", c.asi.batch}};
  const auto& t = c.train;
  j["train"] = {{"phase", training::to_string(t.phase)},
                {"lr", t.lr},
                {"epochs", t.epochs},
                {"batch", t.batch},
                {"snr_db_train", t.snr_db_train},
                {"crossed_rounds", t.crossed_rounds},
                {"convergence_eps", t.convergence_eps},
                {"seed", t.seed},
                {"channel_epochs", t.channel_epochs},
                {"semantic_epochs", t.semantic_epochs},
                {"asc_epochs", t.asc_epochs},
                {"asc_mu", t.asc_mu},
                {"mi_lambda", t.mi_lambda},
                {"mi_pairs", t.mi_pairs},
                {"divergence_factor", t.divergence_factor}};
  j["eval"] = {{"snr_list", c.eval_snr_list}, {"seeds", c.eval_seeds}, {"use_mask", c.eval_use_mask}};
  j["bits_per_element"] = c.bits_per_element;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::config, "config key '" + where + key + "' has the wrong type");
  }
}

RunConfig from_value(const Json& j) {
  RunConfig c;
  c.dataset_dir = get<std::string>(j, "dataset_dir", "");
  const auto size = get<std::vector<int>>(j, "image_size", "");
  if (size.size() != 2) fail(ErrorCode::config, "image_size must be [height, width]");
  c.image_height = size[0];
  c.image_width = size[1];
  c.backend = skb::parse_backend(get<std::string>(j, "backend", ""));
  c.adapter_command = get<std::string>(j, "adapter_command", "");
  c.k_max = get<int>(j, "k_max", "");
  c.interest = get<std::vector<std::string>>(j, "interest", "");
  c.integrity_threshold = get<double>(j, "integrity_threshold", "");
  c.oracle_tolerance = get<double>(j, "oracle_tolerance", "");
  c.max_images = get<int>(j, "max_images", "");
  c.eval_images = get<int>(j, "eval_images", "");

  const Json& cd = j.at("codec");
  c.codec.width1 = get<int>(cd, "width1", "codec.");
  c.codec.width2 = get<int>(cd, "width2", "codec.");
  c.codec.kernel = get<int>(cd, "kernel", "codec.");
  const auto pad = get<std::string>(cd, "padding", "codec.");
  if (pad != "same" && pad != "valid") fail(ErrorCode::config, "codec.padding must be 'same' or 'valid'");
  c.codec.padding = pad == "same" ? nn::Padding::same : nn::Padding::valid;
  c.codec.pool = get<int>(cd, "pool", "codec.");
  c.codec.pool_floor = get<bool>(cd, "pool_floor", "codec.");
  c.codec.mask_hidden = get<int>(cd, "mask_hidden", "codec.");
  c.channel_hidden = get<int>(cd, "channel_hidden", "codec.");

  const Json& ch = j.at("channel");
  c.channel.kind = channel::parse_kind(get<std::string>(ch, "kind", "channel."));
  c.channel.snr_db = get<double>(ch, "snr_db", "channel.");
  c.channel.seed = get<std::uint64_t>(ch, "seed", "channel.");

  const Json& a = j.at("asi");
  c.asi.lr = get<double>(a, "lr", "asi.");
  c.asi.epochs = get<int>(a, "epochs", "asi.");
  c.asi.batch = get<int>(a, "batch", "asi.");

  const Json& t = j.at("train");
  auto& tc = c.train;
  tc.phase = training::parse_phase(get<std::string>(t, "phase", "train."));
  tc.lr = get<double>(t, "lr", "train.");
  tc.epochs = get<int>(t, "epochs", "train.");
  tc.batch = get<int>(t, "batch", "train.");
  tc.snr_db_train = get<double>(t, "snr_db_train", "train.");
  tc.crossed_rounds = get<int>(t, "crossed_rounds", "train.");
  tc.convergence_eps = get<double>(t, "convergence_eps", "train.");
  tc.seed = get<std::uint64_t>(t, "seed", "train.");
  tc.channel_epochs = get<int>(t, "channel_epochs", "train.");
  tc.semantic_epochs = get<int>(t, "semantic_epochs", "train.");
  tc.asc_epochs = get<int>(t, "asc_epochs", "train.");
  tc.asc_mu = get<double>(t, "asc_mu", "train.");
  tc.mi_lambda = get<double>(t, "mi_lambda", "train.");
  tc.mi_pairs = get<std::size_t>(t, "mi_pairs", "train.");
  tc.divergence_factor = get<double>(t, "divergence_factor", "train.");
  tc.channel_kind = c.channel.kind;

  const Json& e = j.at("eval");
  c.eval_snr_list = get<std::vector<double>>(e, "snr_list", "eval.");
  c.eval_seeds = get<std::vector<std::uint64_t>>(e, "seeds", "eval.");
  c.eval_use_mask = get<bool>(e, "use_mask", "eval.");

  c.bits_per_element = get<int>(j, "bits_per_element", "");
  c.output_dir = get<std::string>(j, "output_dir", "");
  c.seed = get<std::uint64_t>(j, "seed", "");
  c.codec.channels = 3;
  return c;
}

bool compatible(const Json& def, const Json& v) {
  if (def.is_number_integer()) return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

void merge(Json& base, const Json& user, const std::string& prefix) {
  if (!user.is_object()) fail(ErrorCode::config, "config " + (prefix.empty() ? std::string("root") : prefix) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) fail(ErrorCode::config, "unknown config key '" + path + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      merge(slot, value, path);
      continue;
    }
    if (!compatible(slot, value)) fail(ErrorCode::config, "config key '" + path + "' has the wrong type");
    slot = slot.is_number_integer() && value.is_number_float() ? Json(static_cast<long long>(value.get<double>())) : value;
  }
}

void apply_override(Json& base, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) fail(ErrorCode::config, "override '" + text + "' is not key=value");
  const std::string key = text.substr(0, eq), raw = text.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  // Build a nested object and merge it so the same key/type checks apply.
  Json patch = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  // A bare string that looked like JSON of another type is retried as a string.
  try {
    merge(base, patch, "");
  } catch (const Error&) {
    if (value.is_string()) throw;
    Json retry = raw;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) retry = Json{{*it, retry}};
    merge(base, retry, "");
  }
}

}  // namespace

std::string RunConfig::to_json() const { return to_value(*this).dump(2); }

std::string RunConfig::digest() const {
  Json j = to_value(*this);
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

void validate(const RunConfig& c, bool require_dataset) {
  if (c.image_height < kMinImageSide || c.image_width < kMinImageSide)
    fail(ErrorCode::config, "image_size must be at least 8x8");
  if (c.image_height % 4 || c.image_width % 4) fail(ErrorCode::config, "image_size must be divisible by 4");
  if (c.k_max < 1) fail(ErrorCode::config, "k_max must be >= 1");
  if (c.max_images < 1 || c.eval_images < 1) fail(ErrorCode::config, "max_images and eval_images must be >= 1");
  if (c.bits_per_element < 1) fail(ErrorCode::config, "bits_per_element must be >= 1");
  if (!(c.integrity_threshold >= 0.0 && c.integrity_threshold <= 1.0))
    fail(ErrorCode::config, "integrity_threshold must lie in [0, 1]");
  if (!(c.oracle_tolerance >= 0.0)) fail(ErrorCode::config, "oracle_tolerance must be >= 0");
  if (!std::isfinite(c.channel.snr_db)) fail(ErrorCode::config, "channel.snr_db must be finite");
  if (c.codec.width1 < 1 || c.codec.width2 < 1 || c.codec.kernel < 1 || c.codec.pool < 1 || c.codec.mask_hidden < 1 ||
      c.channel_hidden < 1)
    fail(ErrorCode::config, "codec widths, kernel and pool must be positive");
  if (c.asi.lr < 0 || c.asi.epochs < 1 || c.asi.batch < 1) fail(ErrorCode::config, "invalid asi hyperparameters");
  if (c.backend == skb::BackendKind::foundation_adapter && c.adapter_command.empty())
    fail(ErrorCode::config, "backend foundation-adapter needs adapter_command");
  c.train.validate();
  codec::stage_sizes(c.codec, c.image_height);
  codec::stage_sizes(c.codec, c.image_width);
  if (require_dataset) {
    if (c.dataset_dir.empty()) fail(ErrorCode::config, "dataset_dir is not set (set it or LAMSC_DATASET_ROOT)");
    if (!std::filesystem::is_directory(c.dataset_dir))
      fail(ErrorCode::config, "dataset_dir does not exist: " + c.dataset_dir);
  }
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides, bool require_dataset) {
  Json user;
  try {
    user = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  Json merged = to_value(RunConfig{});
  merge(merged, user, "");
  if (const char* root = std::getenv(kDatasetRootEnv); root && *root) merged["dataset_dir"] = root;
  for (const auto& o : overrides) apply_override(merged, o);
  RunConfig c = from_value(merged);
  validate(c, require_dataset);
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides, bool require_dataset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::config, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, require_dataset);
}

}  // namespace lamsc::config
