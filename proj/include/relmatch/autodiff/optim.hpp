// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "relmatch/autodiff/params.hpp"

namespace relmatch::ad {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// One AdamW update (decoupled weight decay, bias-corrected moments) on the
/// named parameters. Every named parameter must carry a gradient.
template <class T>
void adamw_step(ParamStore<T>& params, const std::vector<std::string>& names, const AdamWOptions& opt, double lr,
                std::int64_t step) {
  if (step < 1) throw Error("adamw step counter must start at 1, got " + std::to_string(step));
  for (const std::string& name : names) {
    if (!params.at(name).has_grad()) throw Error("parameter '" + name + "' has no gradient");
  }
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (const std::string& name : names) {
    Parameter<T>& p = params.entry(name);
    Tensor<T>& w = p.tensor;
    std::span<const T> g = std::as_const(w).grad();
    if (p.first_moment.size() != w.size()) {
      p.first_moment.assign(w.size(), T{0});
      p.second_moment.assign(w.size(), T{0});
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double m = opt.beta1 * static_cast<double>(p.first_moment[i]) + (1.0 - opt.beta1) * gi;
      const double v = opt.beta2 * static_cast<double>(p.second_moment[i]) + (1.0 - opt.beta2) * gi * gi;
      p.first_moment[i] = static_cast<T>(m);
      p.second_moment[i] = static_cast<T>(v);
      double wi = static_cast<double>(w[i]);
      wi -= lr * opt.weight_decay * wi;
      wi -= lr * (m / c1) / (std::sqrt(v / c2) + opt.epsilon);
      w[i] = static_cast<T>(wi);
    }
  }
}

/// Linear warm-up to `peak` over `warmup` steps, then linear decay to zero
/// at `total` steps.
inline double warmup_linear_lr(double peak, std::int64_t step, std::int64_t warmup, std::int64_t total) {
  if (warmup > 0 && step <= warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (total <= warmup) return peak;
  const double remaining = static_cast<double>(total - step) / static_cast<double>(total - warmup);
  return peak * std::max(0.0, remaining);
}

}  // namespace relmatch::ad
