#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stdgnn/common.hpp"
#include "stdgnn/tensor.hpp"

namespace stdgnn {

/// Adam with bias correction. Moment buffers are created on the first
/// update and keyed by position in the parameter list.
struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline void adam_update(AdamState& state, const ParamList& params) {
  for (const auto* p : params) {
    if (!p->grad.all_finite()) throw RuntimeFailure("adam: non-finite gradient in " + p->name);
    if (p->grad.shape() != p->value.shape()) throw ShapeError("adam: gradient shape mismatch in " + p->name);
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value;
    const auto& grad = params[k]->grad;
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.shape() != value.shape()) throw ShapeError("adam: moment shape mismatch in " + params[k]->name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      value[i] -= state.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::string worst;  // "name[index]" of the worst coordinate
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Central-difference check of analytic gradients. `loss` evaluates the
/// objective at the current parameter values (extended precision keeps the
/// difference quotient clear of rounding noise); `gradients` must zero the
/// gradients and fill them by a forward/backward pass. Up to `max_coords`
/// coordinates are sampled uniformly without replacement.
inline GradCheckResult grad_check(const std::function<long double()>& loss, const std::function<void()>& gradients,
                                  const ParamList& params, std::size_t max_coords = 200, std::uint64_t seed = 0,
                                  double step = 1e-5) {
  gradients();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) coords.emplace_back(p, i);
  }
  if (coords.size() > max_coords) {
    Rng rng(seed);
    for (std::size_t k = 0; k < max_coords; ++k) {
      const auto j = k + static_cast<std::size_t>(uniform_index(rng, coords.size() - k));
      std::swap(coords[k], coords[j]);
    }
    coords.resize(max_coords);
  }
  GradCheckResult res;
  res.coords = coords.size();
  for (const auto& [p, i] : coords) {
    auto& value = params[p]->value;
    const double saved = value[i];
    const double up = saved + step;
    const double down = saved - step;
    value[i] = up;
    const long double plus = loss();
    value[i] = down;
    const long double minus = loss();
    value[i] = saved;
    const auto numeric = static_cast<double>((plus - minus) / (static_cast<long double>(up) - down));
    const double err = relative_error(params[p]->grad[i], numeric);
    if (err > res.max_rel_error || res.worst.empty()) {
      res.max_rel_error = err;
      res.worst = params[p]->name + "[" + std::to_string(i) + "]";
    }
  }
  return res;
}

}  // namespace stdgnn
