#pragma once

// Central-difference verification of hgt::backward.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "beliefcast/hgt.hpp"
#include "beliefcast/loss.hpp"

namespace beliefcast::hgt {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // probes skipped because +-eps straddles a ReLU kink
};

/// Central differences at eps = 1e-4 carry roundoff near 1e-12, so gradients
/// smaller than this are compared on an absolute scale.
inline constexpr double kGradientFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor), with 0/0 taken as 0.
inline double relative_error(double analytic, double numeric, double floor = kGradientFloor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

namespace detail {

// Sign pattern of every rectifier input along the forward pass.
inline std::vector<bool> relu_pattern(const ForwardTrace<double>& t) {
  std::vector<bool> out;
  auto add = [&](const Matrix<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data()[i] > 0.0);
  };
  for (const auto& layer : t.layers) add(layer.aggregate);
  add(t.hidden_pre);
  return out;
}

}  // namespace detail

/// Perturbs every parameter by +-eps and compares (L(+) - L(-)) / 2eps with
/// the analytic gradient. The loss is `loss_scale` times the summed task loss;
/// forwards run in train mode with a fixed dropout seed, so the check is
/// exact with dropout on as well. With the rectifier, a probe whose +-eps
/// forwards change any unit's sign has no valid difference quotient; it is
/// counted in `kinks` and left out of the maximum.
inline GradCheckReport check_gradients(const Topology& topo, const Matrix<double>& features,
                                       const HgtParams<double>& params, const HgtConfig& cfg,
                                       std::span<const Sample> samples, double eps, Task task = Task::Joint,
                                       double loss_scale = 1.0, std::uint64_t dropout_seed = 0) {
  if (!(eps > 0.0)) throw std::invalid_argument("check_gradients: eps must be positive");
  std::vector<NodePair> pairs;
  for (const auto& s : samples) pairs.push_back(s.pair);

  auto loss_of = [&](const HgtParams<double>& p, Matrix<double>* d_logits) {
    auto fwd = model_forward(topo, features, p, cfg, pairs, Mode::Train, dropout_seed);
    return std::pair{task_loss(fwd.logits, samples, task, d_logits, loss_scale), std::move(fwd.trace)};
  };

  Matrix<double> d_logits;
  auto [loss, trace] = loss_of(params, &d_logits);
  (void)loss;
  HgtParams<double> analytic = backward(trace, topo, params, cfg, d_logits);
  const bool rectifier = cfg.activation == Activation::Relu;
  const std::vector<bool> base_pattern = rectifier ? detail::relu_pattern(trace) : std::vector<bool>{};

  HgtParams<double> probe = params;
  auto probe_views = tensors(probe);
  auto grad_views = tensors(analytic);
  GradCheckReport report;
  for (std::size_t t = 0; t < probe_views.size(); ++t) {
    auto& x = probe_views[t].map;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + eps;
      auto [up, up_trace] = loss_of(probe, nullptr);
      x.data()[i] = saved - eps;
      auto [down, down_trace] = loss_of(probe, nullptr);
      x.data()[i] = saved;
      if (rectifier &&
          (detail::relu_pattern(up_trace) != base_pattern || detail::relu_pattern(down_trace) != base_pattern)) {
        ++report.kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grad_views[t].map.data()[i];
      const double err = relative_error(a, numeric);
      ++report.checked;
      if (err > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        report.worst_tensor = probe_views[t].name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace beliefcast::hgt
