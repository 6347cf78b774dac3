// SPDX-License-Identifier: Apache-2.0
//
// Hand-written layer kernels with explicit backward passes. Every kernel works
// on a single HWC sample; batching is done by the callers, which accumulate
// parameter gradients sample by sample in a fixed order so that results do not
// depend on scheduling.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lamsc/tensor.hpp"

namespace lamsc::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Ordered collection of named parameter arrays belonging to one module.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::string module) : module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

  Param& add(const std::string& name, Shape shape);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  Tensor& value(const std::string& name) { return get(name).value; }
  const Tensor& value(const std::string& name) const { return get(name).value; }
  Tensor& grad(const std::string& name) { return get(name).grad; }
  bool contains(const std::string& name) const;

  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }

  void zero_grad();
  std::size_t count() const;
  bool all_finite() const;

  // SHA-256 over names, shapes and raw parameter bytes.
  std::string digest() const;

 private:
  std::string module_;
  std::vector<Param> params_;
};

// -- initialisation ---------------------------------------------------------

// He-normal init for weights whose fan-in is the product of all dims except
// the last; biases are set to `bias`.
void init_he(Tensor& weight, std::mt19937_64& rng, double gain = 1.0);
void init_uniform(Tensor& t, std::mt19937_64& rng, double limit);

// -- layers -----------------------------------------------------------------

enum class Padding { same, valid };

int conv_pad(Padding padding, int kernel);

// y = conv(x, w) + b; w has shape (k, k, cin, cout), stride 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);
// Accumulates into dw/db; writes dx when non-null.
void conv2d_backward(const Tensor& x, const Tensor& w, int pad, const Tensor& dy,
                     Tensor* dx, Tensor& dw, Tensor& db);

// Transposed convolution (adjoint of conv2d, stride 1). w has shape
// (k, k, cout, cin): the forward conv it transposes maps cout -> cin.
// Output size is in + k - 1 - 2*pad.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);
void conv_transpose2d_backward(const Tensor& x, const Tensor& w, int pad, const Tensor& dy,
                               Tensor* dx, Tensor& dw, Tensor& db);

// Non-overlapping max pool with window = stride = `size`; trailing rows and
// columns that do not fill a window are dropped.
struct PoolCache {
  std::vector<std::size_t> argmax;
  Shape input_shape;
};
Tensor maxpool2d(const Tensor& x, int size, PoolCache* cache);
Tensor maxpool2d_backward(const PoolCache& cache, const Tensor& dy);

// Nearest-neighbour resize: source index floor(i * in / out).
Tensor resize_nearest(const Tensor& x, int out_h, int out_w);
Tensor resize_nearest_backward(const Tensor& dy, const Shape& input_shape);

void relu_inplace(Tensor& x);
// Zeroes dy where the forward output was <= 0.
void relu_backward_inplace(const Tensor& y, Tensor& dy);

double sigmoid(double z) noexcept;

// -- optimiser ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamSet& params, AdamConfig config);
  // Applies one update using grad * grad_scale, then clears the gradients.
  void step(double grad_scale = 1.0);
  const AdamConfig& config() const noexcept { return config_; }

 private:
  ParamSet* params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long step_ = 0;
};

// -- misc ---------------------------------------------------------------------

// SplitMix64-based seed derivation for independent, reproducible streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

double mean_squared_error(const Tensor& a, const Tensor& b);

}  // namespace lamsc::nn
