// SPDX-License-Identifier: Apache-2.0
#include "lamsc/asi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lamsc/error.hpp"

namespace fs = std::filesystem;

namespace lamsc::asi {

namespace {

constexpr const char* kFc1W = "channel_mlp.fc1.weight";
constexpr const char* kFc1B = "channel_mlp.fc1.bias";
constexpr const char* kFc2W = "channel_mlp.fc2.weight";
constexpr const char* kFc2B = "channel_mlp.fc2.bias";
constexpr const char* kSpW = "spatial_conv.weight";
constexpr const char* kSpB = "spatial_conv.bias";

struct Mlp {
  const Tensor& w1;
  const Tensor& b1;
  const Tensor& w2;
  const Tensor& b2;
  int in, hidden;

  // Returns the scalar output and stores post-ReLU hidden activations.
  double forward(const double* x, std::vector<double>& h) const {
    h.assign(static_cast<std::size_t>(hidden), 0.0);
    double out = b2[0];
    for (int j = 0; j < hidden; ++j) {
      double a = b1[static_cast<std::size_t>(j)];
      for (int i = 0; i < in; ++i) a += x[i] * w1[static_cast<std::size_t>(i * hidden + j)];
      h[static_cast<std::size_t>(j)] = a > 0 ? a : 0.0;
      out += h[static_cast<std::size_t>(j)] * w2[static_cast<std::size_t>(j)];
    }
    return out;
  }
};

struct Forward {
  int k = 0, h = 0, w = 0, c = 0;
  std::vector<std::vector<double>> max_desc, mean_desc;
  std::vector<std::vector<double>> hid_max, hid_mean;
  std::vector<double> weights;
  Tensor low_level;
  Tensor pooled;                     // H x W x 2
  std::vector<std::size_t> argmax;   // per pixel, index into low_level
  Tensor gate;                       // H x W x 1
  Tensor sum;                        // H x W x C
  Tensor out;                        // H x W x C, clipped
};

Mlp mlp_of(const AttentionParams& p) {
  return Mlp{p.params.value(kFc1W), p.params.value(kFc1B), p.params.value(kFc2W), p.params.value(kFc2B),
             p.channels, p.hidden};
}

void check_stack(const SegmentStack& stack, const AttentionParams& params) {
  if (stack.data.rank() != 4) fail(ErrorCode::shape_mismatch, "segment stack must be KxHxWxC");
  if (stack.channels() != params.channels)
    fail(ErrorCode::shape_mismatch, "segment stack has " + std::to_string(stack.channels()) +
                                        " colour channels but the channel-attention MLP expects " +
                                        std::to_string(params.channels));
  if (!params.params.all_finite()) fail(ErrorCode::numeric, "attention parameters contain non-finite values");
}

void channel_forward(const SegmentStack& stack, const AttentionParams& params, Forward& f) {
  check_stack(stack, params);
  f.k = stack.k();
  f.h = stack.height();
  f.w = stack.width();
  f.c = stack.channels();
  const std::size_t plane = static_cast<std::size_t>(f.h) * f.w * f.c;
  const Mlp mlp = mlp_of(params);
  f.max_desc.assign(static_cast<std::size_t>(f.k), std::vector<double>(static_cast<std::size_t>(f.c), 0.0));
  f.mean_desc = f.max_desc;
  f.hid_max.assign(static_cast<std::size_t>(f.k), {});
  f.hid_mean.assign(static_cast<std::size_t>(f.k), {});
  f.weights.assign(static_cast<std::size_t>(f.k), 0.0);
  f.low_level = Tensor(stack.data.shape());
  for (int s = 0; s < f.k; ++s) {
    const double* seg = stack.data.data() + plane * static_cast<std::size_t>(s);
    auto& mx = f.max_desc[static_cast<std::size_t>(s)];
    auto& mn = f.mean_desc[static_cast<std::size_t>(s)];
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p < plane; p += static_cast<std::size_t>(f.c))
      for (int ch = 0; ch < f.c; ++ch) {
        const double v = seg[p + static_cast<std::size_t>(ch)];
        mx[static_cast<std::size_t>(ch)] = std::max(mx[static_cast<std::size_t>(ch)], v);
        mn[static_cast<std::size_t>(ch)] += v;
      }
    for (auto& v : mn) v /= static_cast<double>(f.h) * f.w;
    const double logit = mlp.forward(mx.data(), f.hid_max[static_cast<std::size_t>(s)]) +
                         mlp.forward(mn.data(), f.hid_mean[static_cast<std::size_t>(s)]);
    const double wk = nn::sigmoid(logit);
    f.weights[static_cast<std::size_t>(s)] = wk;
    double* low = f.low_level.data() + plane * static_cast<std::size_t>(s);
    for (std::size_t p = 0; p < plane; ++p) low[p] = wk * seg[p];
  }
}

void spatial_forward(const Tensor& low, const AttentionParams& params, Forward& f) {
  if (low.rank() != 4) fail(ErrorCode::shape_mismatch, "low-level semantics must be KxHxWxC");
  if (!low.all_finite()) fail(ErrorCode::numeric, "low-level semantics contain non-finite values");
  f.k = low.dim(0);
  f.h = low.dim(1);
  f.w = low.dim(2);
  f.c = low.dim(3);
  const std::size_t npix = static_cast<std::size_t>(f.h) * f.w;
  const std::size_t plane = npix * static_cast<std::size_t>(f.c);
  f.pooled = Tensor({f.h, f.w, 2});
  f.sum = Tensor({f.h, f.w, f.c});
  f.argmax.assign(npix, 0);
  const double denom = static_cast<double>(f.k) * f.c;
  for (std::size_t p = 0; p < npix; ++p) {
    double mx = -std::numeric_limits<double>::infinity(), mean = 0.0;
    std::size_t arg = 0;
    for (int s = 0; s < f.k; ++s)
      for (int ch = 0; ch < f.c; ++ch) {
        const std::size_t i = plane * static_cast<std::size_t>(s) + p * static_cast<std::size_t>(f.c) + static_cast<std::size_t>(ch);
        const double v = low[i];
        if (v > mx) {
          mx = v;
          arg = i;
        }
        mean += v;
        f.sum[p * static_cast<std::size_t>(f.c) + static_cast<std::size_t>(ch)] += v;
      }
    f.pooled[2 * p] = mx;
    f.pooled[2 * p + 1] = mean / denom;
    f.argmax[p] = arg;
  }
  f.gate = nn::conv2d(f.pooled, params.params.value(kSpW), params.params.value(kSpB), kSpatialKernel / 2);
  for (auto& g : f.gate.values()) g = nn::sigmoid(g);
  f.out = Tensor({f.h, f.w, f.c});
  for (std::size_t p = 0; p < npix; ++p)
    for (int ch = 0; ch < f.c; ++ch) {
      const std::size_t i = p * static_cast<std::size_t>(f.c) + static_cast<std::size_t>(ch);
      f.out[i] = std::clamp(f.gate[p] * f.sum[i], 0.0, 1.0);
    }
}

}  // namespace

SegmentStack make_stack(const skb::SegmentSet& segments, int k_max) {
  if (k_max < 1) fail(ErrorCode::config, "K_max must be >= 1");
  if (segments.masks.size() > static_cast<std::size_t>(k_max))
    fail(ErrorCode::precondition, "segment set has " + std::to_string(segments.masks.size()) + " masks, K_max is " +
                                      std::to_string(k_max));
  const auto& src = segments.source;
  SegmentStack stack;
  stack.data = Tensor({k_max, src.height(), src.width(), src.channels()});
  stack.valid_count = static_cast<int>(segments.masks.size());
  stack.labels.assign(static_cast<std::size_t>(k_max), {});
  const std::size_t plane = src.pixels.size();
  for (std::size_t s = 0; s < segments.masks.size(); ++s) {
    const ImageSample seg = skb::extract_segment(src, segments.masks[s]);
    std::memcpy(stack.data.data() + plane * s, seg.pixels.data(), plane * sizeof(double));
    stack.labels[s] = segments.masks[s].label;
  }
  return stack;
}

AttentionParams make_attention_params(int channels, int k_max, std::uint64_t seed) {
  if (channels < 1 || k_max < 1) fail(ErrorCode::config, "attention params need channels >= 1 and K_max >= 1");
  AttentionParams p;
  p.rng_seed = seed;
  p.channels = channels;
  p.k_max = k_max;
  p.hidden = (k_max + 1) / 2;
  std::mt19937_64 rng(seed);
  nn::init_he(p.params.add(kFc1W, {channels, p.hidden}).value, rng);
  p.params.add(kFc1B, {p.hidden});
  nn::init_he(p.params.add(kFc2W, {p.hidden, 1}).value, rng);
  p.params.add(kFc2B, {1});
  nn::init_he(p.params.add(kSpW, {kSpatialKernel, kSpatialKernel, 2, 1}).value, rng, 0.5);
  p.params.add(kSpB, {1});
  return p;
}

ChannelAttentionResult channel_attention(const SegmentStack& stack, const AttentionParams& params) {
  Forward f;
  channel_forward(stack, params, f);
  return ChannelAttentionResult{std::move(f.weights), std::move(f.low_level)};
}

ImageSample spatial_attention(const Tensor& low_level, const AttentionParams& params) {
  Forward f;
  spatial_forward(low_level, params, f);
  return ImageSample{std::move(f.out), {}};
}

ImageSample integrate(const SegmentStack& stack, const AttentionParams& params) {
  Forward f;
  channel_forward(stack, params, f);
  spatial_forward(f.low_level, params, f);
  return ImageSample{std::move(f.out), {}};
}

ImageSample human_select(const SegmentStack& stack, const std::vector<std::uint8_t>& selection) {
  if (selection.size() != static_cast<std::size_t>(stack.k()))
    fail(ErrorCode::shape_mismatch, "selection length " + std::to_string(selection.size()) + " != K " +
                                        std::to_string(stack.k()));
  bool any = false;
  for (int s = 0; s < stack.valid_count; ++s) any |= selection[static_cast<std::size_t>(s)] != 0;
  if (!any) fail(ErrorCode::invalid_argument, "empty selection: choose at least one valid segment");
  ImageSample out = make_image(stack.height(), stack.width(), stack.channels());
  const std::size_t plane = out.pixels.size();
  for (int s = 0; s < stack.k(); ++s) {
    if (!selection[static_cast<std::size_t>(s)]) continue;
    const double* seg = stack.data.data() + plane * static_cast<std::size_t>(s);
    for (std::size_t i = 0; i < plane; ++i) out.pixels[i] += seg[i];
  }
  clip_unit(out.pixels);
  return out;
}

double integration_loss(const SegmentStack& stack, const ImageSample& target, AttentionParams& params,
                        bool accumulate, double grad_scale) {
  Forward f;
  channel_forward(stack, params, f);
  spatial_forward(f.low_level, params, f);
  if (!f.out.same_shape(target.pixels))
    fail(ErrorCode::shape_mismatch, "integration target " + shape_str(target.pixels.shape()) + " vs output " +
                                        shape_str(f.out.shape()));
  const double loss = nn::mean_squared_error(f.out, target.pixels);
  if (!accumulate) return loss;

  const std::size_t npix = static_cast<std::size_t>(f.h) * f.w;
  const std::size_t c = static_cast<std::size_t>(f.c);
  const std::size_t plane = npix * c;
  const double n = static_cast<double>(f.out.size());

  // d out -> d gate, d sum (clip passes gradient only inside [0,1]).
  Tensor dgate_pre({f.h, f.w, 1});
  Tensor dsum({f.h, f.w, f.c});
  for (std::size_t p = 0; p < npix; ++p) {
    double dg = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = p * c + ch;
      const double raw = f.gate[p] * f.sum[i];
      if (raw < 0.0 || raw > 1.0) continue;
      const double dout = 2.0 * (f.out[i] - target.pixels[i]) / n * grad_scale;
      dg += dout * f.sum[i];
      dsum[i] = dout * f.gate[p];
    }
    dgate_pre[p] = dg * f.gate[p] * (1.0 - f.gate[p]);
  }
  Tensor dpooled;
  nn::conv2d_backward(f.pooled, params.params.value(kSpW), kSpatialKernel / 2, dgate_pre, &dpooled,
                      params.params.grad(kSpW), params.params.grad(kSpB));

  // d low_level from the K-sum and the two pooled planes.
  Tensor dlow(f.low_level.shape());
  const double denom = static_cast<double>(f.k) * f.c;
  for (std::size_t p = 0; p < npix; ++p) {
    dlow[f.argmax[p]] += dpooled[2 * p];
    const double dmean = dpooled[2 * p + 1] / denom;
    for (int s = 0; s < f.k; ++s)
      for (std::size_t ch = 0; ch < c; ++ch)
        dlow[plane * static_cast<std::size_t>(s) + p * c + ch] += dsum[p * c + ch] + dmean;
  }

  // d weights -> d logits -> MLP parameters (shared by both pooled paths).
  const Mlp mlp = mlp_of(params);
  Tensor& gw1 = params.params.grad(kFc1W);
  Tensor& gb1 = params.params.grad(kFc1B);
  Tensor& gw2 = params.params.grad(kFc2W);
  Tensor& gb2 = params.params.grad(kFc2B);
  for (int s = 0; s < f.k; ++s) {
    const double* seg = stack.data.data() + plane * static_cast<std::size_t>(s);
    const double* dl = dlow.data() + plane * static_cast<std::size_t>(s);
    double dw = 0.0;
    for (std::size_t i = 0; i < plane; ++i) dw += dl[i] * seg[i];
    const double wk = f.weights[static_cast<std::size_t>(s)];
    const double dlogit = dw * wk * (1.0 - wk);
    for (int path = 0; path < 2; ++path) {
      const auto& x = path == 0 ? f.max_desc[static_cast<std::size_t>(s)] : f.mean_desc[static_cast<std::size_t>(s)];
      const auto& hid = path == 0 ? f.hid_max[static_cast<std::size_t>(s)] : f.hid_mean[static_cast<std::size_t>(s)];
      gb2[0] += dlogit;
      for (int j = 0; j < mlp.hidden; ++j) {
        gw2[static_cast<std::size_t>(j)] += dlogit * hid[static_cast<std::size_t>(j)];
        if (hid[static_cast<std::size_t>(j)] <= 0.0) continue;
        const double dh = dlogit * mlp.w2[static_cast<std::size_t>(j)];
        gb1[static_cast<std::size_t>(j)] += dh;
        for (int i = 0; i < mlp.in; ++i) gw1[static_cast<std::size_t>(i * mlp.hidden + j)] += dh * x[static_cast<std::size_t>(i)];
      }
    }
  }
  return loss;
}

// -- experience ----------------------------------------------------------------------

std::vector<std::uint8_t> interest_selection(const SegmentStack& stack, const std::vector<std::string>& interest) {
  std::vector<std::uint8_t> sel(static_cast<std::size_t>(stack.k()), 0);
  for (int s = 0; s < stack.valid_count; ++s)
    sel[static_cast<std::size_t>(s)] =
        std::find(interest.begin(), interest.end(), stack.labels[static_cast<std::size_t>(s)]) != interest.end();
  return sel;
}

ExperienceBase build_synthetic_experience(const std::vector<SegmentStack>& stacks,
                                          const std::vector<std::string>& interest) {
  ExperienceBase base;
  base.provenance = Provenance::synthetic_oracle;
  for (const auto& st : stacks) {
    auto sel = interest_selection(st, interest);
    if (std::none_of(sel.begin(), sel.end(), [](std::uint8_t b) { return b != 0; })) continue;
    base.records.push_back(ExperienceRecord{st, std::move(sel)});
  }
  return base;
}

namespace {

constexpr char kExpMagic[8] = {'L', 'A', 'M', 'S', 'C', 'E', 'X', 'P'};
constexpr std::uint32_t kExpVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::io, "truncated experience record " + path);
  return v;
}

}  // namespace

void save_experience(const ExperienceBase& base, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t r = 0; r < base.records.size(); ++r) {
    const auto& rec = base.records[r];
    char name[32];
    std::snprintf(name, sizeof(name), "record_%05zu.bin", r);
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) fail(ErrorCode::io, "cannot write experience record in " + dir);
    os.write(kExpMagic, sizeof(kExpMagic));
    put<std::uint32_t>(os, kExpVersion);
    for (int d : rec.stack.data.shape()) put<std::int32_t>(os, d);
    put<std::int32_t>(os, rec.stack.valid_count);
    for (auto b : rec.selection) os.put(b ? '1' : '0');
    for (const auto& l : rec.stack.labels) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(l.size()));
      os.write(l.data(), static_cast<std::streamsize>(l.size()));
    }
    os.write(reinterpret_cast<const char*>(rec.stack.data.data()),
             static_cast<std::streamsize>(rec.stack.data.size() * sizeof(double)));
  }
  nlohmann::json m = {{"format", "lamsc.experience"},
                      {"version", kExpVersion},
                      {"provenance", base.provenance == Provenance::human ? "human" : "synthetic-oracle"},
                      {"count", base.records.size()}};
  std::ofstream(fs::path(dir) / "manifest.json") << m.dump(2) << '\n';
}

ExperienceBase load_experience(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.json";
  std::ifstream ms(manifest);
  if (!ms) fail(ErrorCode::io, "experience base has no manifest.json: " + dir);
  const auto m = nlohmann::json::parse(ms);
  if (m.value("format", "") != "lamsc.experience" || m.value("version", 0u) != kExpVersion)
    fail(ErrorCode::io, "unsupported experience base format in " + dir);
  ExperienceBase base;
  base.provenance = m.value("provenance", "") == "human" ? Provenance::human : Provenance::synthetic_oracle;
  const std::size_t count = m.at("count").get<std::size_t>();
  for (std::size_t r = 0; r < count; ++r) {
    char name[32];
    std::snprintf(name, sizeof(name), "record_%05zu.bin", r);
    const std::string path = (fs::path(dir) / name).string();
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::io, "missing experience record " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kExpMagic, 8) != 0) fail(ErrorCode::io, "bad experience record header " + path);
    if (get<std::uint32_t>(is, path) != kExpVersion) fail(ErrorCode::io, "unsupported experience record version " + path);
    Shape shape(4);
    for (auto& d : shape) d = get<std::int32_t>(is, path);
    ExperienceRecord rec;
    rec.stack.data = Tensor(shape);
    rec.stack.valid_count = get<std::int32_t>(is, path);
    rec.selection.resize(static_cast<std::size_t>(shape[0]));
    for (auto& b : rec.selection) {
      const int ch = is.get();
      if (ch != '0' && ch != '1') fail(ErrorCode::io, "bad selection bits in " + path);
      b = ch == '1';
    }
    rec.stack.labels.resize(static_cast<std::size_t>(shape[0]));
    for (auto& l : rec.stack.labels) {
      l.resize(get<std::uint32_t>(is, path));
      is.read(l.data(), static_cast<std::streamsize>(l.size()));
    }
    is.read(reinterpret_cast<char*>(rec.stack.data.data()), static_cast<std::streamsize>(rec.stack.data.size() * sizeof(double)));
    if (!is) fail(ErrorCode::io, "truncated experience record " + path);
    base.records.push_back(std::move(rec));
  }
  return base;
}

// -- training ----------------------------------------------------------------------------

AsiTrainResult train_asi(const ExperienceBase& base, AttentionParams& params, const AsiHyper& hyper) {
  if (base.records.empty()) fail(ErrorCode::invalid_argument, "ASI training needs a non-empty experience base");
  if (!(hyper.lr >= 0.0) || hyper.epochs < 1 || hyper.batch < 1)
    fail(ErrorCode::config, "ASI hyperparameters need lr >= 0, epochs >= 1, batch >= 1");
  std::vector<ImageSample> targets;
  targets.reserve(base.records.size());
  for (const auto& r : base.records) targets.push_back(human_select(r.stack, r.selection));

  auto evaluate = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < base.records.size(); ++i)
      total += integration_loss(base.records[i].stack, targets[i], params, false);
    return total / static_cast<double>(base.records.size());
  };

  AsiTrainResult result;
  result.loss_trace.push_back(evaluate());
  params.params.zero_grad();
  nn::Adam adam(params.params, nn::AdamConfig{hyper.lr});
  std::vector<std::size_t> order(base.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(params.rng_seed);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      for (std::size_t i = start; i < end; ++i)
        integration_loss(base.records[order[i]].stack, targets[order[i]], params, true);
      adam.step(1.0 / static_cast<double>(end - start));
    }
    const double loss = evaluate();
    if (!std::isfinite(loss) || !params.params.all_finite()) {
      std::ostringstream os;
      os << "ASI training diverged at epoch " << epoch + 1 << " (loss " << loss << ", lr " << hyper.lr
         << "); trace:";
      for (double l : result.loss_trace) os << ' ' << l;
      fail(ErrorCode::numeric, os.str());
    }
    result.loss_trace.push_back(loss);
  }
  return result;
}

}  // namespace lamsc::asi
