#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "beliefcast/beliefs.hpp"
#include "beliefcast/datamodel.hpp"

namespace beliefcast {

/// A correlation coefficient in [-1, 1]. `degenerate` is set, and `value` is
/// 0, when either input has zero variance.
struct Correlation {
  double value = 0.0;
  bool degenerate = false;
};

/// Throws std::invalid_argument on length mismatch or fewer than 2 points.
Correlation pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> x);

/// Fraction of positions where the labels agree.
double micro_f1(std::span<const int> truth, std::span<const int> pred, int classes);
/// Unweighted mean of per-class F1 over all `classes`. A class with no true
/// and no predicted instance scores 0.
double macro_f1(std::span<const int> truth, std::span<const int> pred, int classes);

double micro_f1(std::span<const Polarity> truth, std::span<const Polarity> pred);
double macro_f1(std::span<const Polarity> truth, std::span<const Polarity> pred);

struct Label {
  Polarity polarity = Polarity::Neutral;
  int intensity = 0;

  bool operator==(const Label&) const = default;
};

/// Correlations in percent (signed), F1 scores in percent.
struct EvalReport {
  double r_s = 0.0;
  double r = 0.0;
  double mif1 = 0.0;
  double maf1 = 0.0;
  bool r_s_degenerate = true;
  bool r_degenerate = true;
  std::size_t n_samples = 0;
  std::size_t failures = 0;
  std::map<Belief, EvalReport> by_belief;
  std::map<std::string, EvalReport> subsets;  // e.g. "lurkers", "unseen"
};

/// Intensity correlations are computed on signed intensity; polarity F1 over
/// the three classes. Fewer than two samples leave the correlations degenerate.
EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> gold);

/// Per-belief segments: a sample counts toward every belief in its row of
/// `beliefs`.
std::map<Belief, EvalReport> evaluate_by_belief(std::span<const Label> predictions,
                                                std::span<const Label> gold,
                                                std::span<const std::vector<Belief>> beliefs);

/// report.json text. Percentages are rounded to 2 decimals.
std::string report_to_json(const EvalReport& report);

}  // namespace beliefcast
