#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "beliefcast/hgt.hpp"

namespace beliefcast::hgt {

struct RAdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
  bool rectify = true;  // false: always take the bias-corrected momentum step
};

template <typename S>
struct RAdamState {
  std::vector<Matrix<S>> m, v;
  long step = 0;
};

/// Rectified Adam with decoupled weight decay. The decay theta -= lr*wd*theta
/// is applied first, then the moment update. While the variance rectification
/// term is undefined (rho_t <= 4) the step is theta -= lr * m_hat.
template <typename S>
void radam_step(RAdamState<S>& state, std::vector<TensorView<S>>& params, const std::vector<TensorView<S>>& grads,
                const RAdamConfig& cfg, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("radam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix<S>::Zero(p.map.rows(), p.map.cols()));
      state.v.push_back(Matrix<S>::Zero(p.map.rows(), p.map.cols()));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("radam: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].map.rows() != grads[i].map.rows() || params[i].map.cols() != grads[i].map.cols())
      throw std::invalid_argument("radam: shape mismatch for " + params[i].name);
    if (!grads[i].map.allFinite()) throw NumericError("radam: non-finite gradient for " + params[i].name);
  }

  const long t = ++state.step;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double b1t = std::pow(b1, static_cast<double>(t)), b2t = std::pow(b2, static_cast<double>(t));
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
  const double rho_t = rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
  const bool rectified = cfg.rectify && rho_t > 4.0;
  const double r_t =
      rectified ? std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                : 0.0;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].map;
    const auto& g = grads[i].map;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (cfg.weight_decay != 0.0) theta -= static_cast<S>(lr * cfg.weight_decay) * theta;
    m = static_cast<S>(b1) * m + static_cast<S>(1.0 - b1) * g;
    v = static_cast<S>(b2) * v + static_cast<S>(1.0 - b2) * g.cwiseProduct(g);
    const Matrix<S> m_hat = m / static_cast<S>(1.0 - b1t);
    if (rectified) {
      const Matrix<S> v_hat = (v / static_cast<S>(1.0 - b2t)).cwiseSqrt();
      theta -= (static_cast<S>(lr * r_t) * m_hat.array() / (v_hat.array() + static_cast<S>(cfg.epsilon))).matrix();
    } else {
      theta -= static_cast<S>(lr) * m_hat;
    }
  }
}

/// Linear warmup from 0 to `base_lr` over ceil(warmup_ratio * total) steps,
/// then linear decay to 0 at `total`.
inline double lr_schedule(long step, long total, double base_lr, double warmup_ratio) {
  if (step < 0 || step > total) throw std::invalid_argument("lr_schedule: step outside [0, total]");
  const long warmup = static_cast<long>(std::ceil(warmup_ratio * static_cast<double>(total)));
  if (step < warmup) return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total == warmup) return base_lr;
  return base_lr * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

}  // namespace beliefcast::hgt
