#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string_view>

#include "beliefcast/hgt.hpp"

namespace beliefcast::hgt {

/// Which logit groups contribute to the loss.
enum class Task : std::uint8_t { Joint, Polarity, Intensity };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::Joint: return "joint";
    case Task::Polarity: return "polarity";
    case Task::Intensity: return "intensity";
  }
  return "joint";
}

inline Task parse_task(std::string_view s) {
  if (s == "joint") return Task::Joint;
  if (s == "polarity") return Task::Polarity;
  if (s == "intensity") return Task::Intensity;
  throw std::invalid_argument("unknown task \"" + std::string(s) + "\"");
}

struct Sample {
  NodePair pair;
  int polarity = 0;   // index into Negative/Neutral/Positive
  int intensity = 0;  // 0..3
};

/// -log softmax(logits)[label]. Writes d loss / d logits into `grad` when given.
template <typename S, typename Derived>
S cross_entropy(const Eigen::MatrixBase<Derived>& logits, int label, Vector<S>* grad = nullptr) {
  if (label < 0 || label >= logits.size())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range");
  const S top = logits.maxCoeff();
  const Vector<S> shifted = (logits.array() - top).matrix();
  const S log_sum = std::log(shifted.array().exp().sum());
  if (grad) {
    *grad = (shifted.array() - log_sum).exp().matrix();
    (*grad)[label] -= S(1);
  }
  return log_sum - shifted[label];
}

/// Summed loss over `samples`, whose columns in `logits` are aligned. Fills
/// `d_logits` (7 x n) scaled by `scale` when given.
template <typename S>
S task_loss(const Matrix<S>& logits, std::span<const Sample> samples, Task task, Matrix<S>* d_logits = nullptr,
            S scale = S(1)) {
  if (logits.rows() != kOutputs || logits.cols() != static_cast<Eigen::Index>(samples.size()))
    throw std::invalid_argument("task_loss: logits do not match samples");
  if (d_logits) *d_logits = Matrix<S>::Zero(kOutputs, logits.cols());
  S total = 0;
  Vector<S> g;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto& s = samples[static_cast<std::size_t>(j)];
    if (task != Task::Intensity) {
      total += cross_entropy<S>(logits.col(j).head(kPolarityClasses), s.polarity, d_logits ? &g : nullptr);
      if (d_logits) d_logits->col(j).head(kPolarityClasses) = scale * g;
    }
    if (task != Task::Polarity) {
      total += cross_entropy<S>(logits.col(j).tail(kIntensityClasses), s.intensity, d_logits ? &g : nullptr);
      if (d_logits) d_logits->col(j).tail(kIntensityClasses) = scale * g;
    }
  }
  return scale * total;
}

}  // namespace beliefcast::hgt
