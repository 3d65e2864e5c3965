#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stdgnn/common.hpp"

namespace stdgnn {

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape " +
                       shape_string(shape_));
    }
  }

  static Tensor from_vector(std::vector<double> v) {
    const auto n = v.size();
    return Tensor({n}, std::move(v));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D access.
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  // 3-D access.
  double& operator()(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * shape_[1], shape_[1]}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * shape_[1], shape_[1]}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
    out << ')';
    return out.str();
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// A learnable tensor together with its accumulated gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParamList = std::vector<Param*>;

inline void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

inline void expect_shape(const Tensor& t, const std::vector<std::size_t>& shape, const char* what) {
  if (t.shape() != shape) {
    throw ShapeError(std::string(what) + ": expected shape " + Tensor::shape_string(shape) + ", got " +
                     Tensor::shape_string(t.shape()));
  }
}

inline void expect_length(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                     std::to_string(v.size()));
  }
}

// y += W x for W of shape (out, in).
inline void gemv_add(const Tensor& w, std::span<const double> x, std::span<double> y) {
  const std::size_t out = w.dim(0);
  const std::size_t in = w.dim(1);
  const double* wp = w.data();
  for (std::size_t r = 0; r < out; ++r) {
    double acc = 0.0;
    const double* row = wp + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// x_grad += W^T dy.
inline void gemv_t_add(const Tensor& w, std::span<const double> dy, std::span<double> x_grad) {
  const std::size_t out = w.dim(0);
  const std::size_t in = w.dim(1);
  const double* wp = w.data();
  for (std::size_t r = 0; r < out; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* row = wp + r * in;
    for (std::size_t c = 0; c < in; ++c) x_grad[c] += row[c] * g;
  }
}

// W_grad += dy x^T.
inline void outer_add(Tensor& w_grad, std::span<const double> dy, std::span<const double> x) {
  const std::size_t in = w_grad.dim(1);
  double* gp = w_grad.data();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* row = gp + r * in;
    for (std::size_t c = 0; c < in; ++c) row[c] += g * x[c];
  }
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    s += out[i];
  }
  for (auto& v : out) v /= s;
  return out;
}

}  // namespace stdgnn
