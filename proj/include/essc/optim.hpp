#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "essc/param.hpp"

namespace essc::optim {

struct AdamConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

// First (m) and second (v) moment accumulators, one array per parameter.
struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  explicit AdamState(AdamConfig cfg = {});
  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam update of every parameter from its grad buffer. Moment
// arrays are sized on the first step. Throws ShapeMismatch when the parameter
// layout changes between steps and NonFiniteGradient (before touching any
// state) when a gradient is NaN or infinite.
void adam_step(std::span<const ParamView> params, AdamState& state);

// params <- params - lr * grads.
void sgd_step(std::span<const ParamView> params, double lr);

}  // namespace essc::optim
