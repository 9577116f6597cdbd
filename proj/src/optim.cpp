#include "essc/optim.hpp"

#include <cmath>

#include "essc/error.hpp"

namespace essc::optim {

namespace {

void check_shapes(std::span<const ParamView> params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value.size() != params[i].grad.size()) {
      fail(ErrorKind::ShapeMismatch, "parameter " + std::to_string(i) + " and its gradient differ in size");
    }
  }
}

}  // namespace

AdamState::AdamState(AdamConfig cfg) : config(cfg) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    fail(ErrorKind::InvalidArgument, "Adam betas must lie in [0, 1)");
  }
  if (!(cfg.lr > 0.0) || !(cfg.eps >= 0.0)) fail(ErrorKind::InvalidArgument, "Adam lr must be > 0 and eps >= 0");
}

void adam_step(std::span<const ParamView> params, AdamState& state) {
  check_shapes(params);
  if (state.m.empty() && state.t == 0) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].value.size(), 0.0);
      state.v[i].assign(params[i].value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorKind::ShapeMismatch, "Adam state tracks a different number of parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].value.size() || state.v[i].size() != params[i].value.size()) {
      fail(ErrorKind::ShapeMismatch, "Adam state shape differs for parameter " + std::to_string(i));
    }
    for (double g : params[i].grad) {
      if (!std::isfinite(g)) fail(ErrorKind::NonFiniteGradient, "non-finite gradient in parameter " + std::to_string(i));
    }
  }

  const auto& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto value = params[i].value;
    auto grad = params[i].grad;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void sgd_step(std::span<const ParamView> params, double lr) {
  check_shapes(params);
  for (const auto& p : params) {
    for (std::size_t j = 0; j < p.value.size(); ++j) p.value[j] -= lr * p.grad[j];
  }
}

}  // namespace essc::optim
