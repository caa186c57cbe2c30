#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace ddi::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense float64 array in row-major order.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(numel(shape), fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double* row(std::size_t r) { return data.data() + r * shape.back(); }
  const double* row(std::size_t r) const { return data.data() + r * shape.back(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool operator==(const Tensor&) const = default;
};

/// A trainable tensor with its gradient and Adam moment buffers.
struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
};

class ParamStore {
 public:
  Param& add(const std::string& name, Shape shape);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();

  std::map<std::string, Param>& all() { return params_; }
  const std::map<std::string, Param>& all() const { return params_; }

 private:
  // std::map keeps element addresses stable, which graph ops rely on.
  std::map<std::string, Param> params_;
};

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;

  void check() const;
};

/// Standard bias-corrected Adam update over every parameter in the store.
void adam_step(ParamStore& store, AdamState& state);

/// Uniform [0,1) draw built from raw engine output so that sequences are
/// identical across standard library implementations.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace ddi::nn
