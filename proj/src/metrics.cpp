#include "beliefcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace beliefcast {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

std::vector<int> indices(std::span<const Polarity> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (Polarity p : labels) out.push_back(static_cast<int>(p));
  return out;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  require_aligned(x.size(), y.size(), "pearson");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  require_aligned(x.size(), y.size(), "spearman");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

double micro_f1(std::span<const int> truth, std::span<const int> pred, int classes) {
  require_aligned(truth.size(), pred.size(), "micro_f1");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || pred[i] < 0 || pred[i] >= classes)
      throw std::invalid_argument("micro_f1: label out of range");
    hits += truth[i] == pred[i];
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double macro_f1(std::span<const int> truth, std::span<const int> pred, int classes) {
  require_aligned(truth.size(), pred.size(), "macro_f1");
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || pred[i] < 0 || pred[i] >= classes)
      throw std::invalid_argument("macro_f1: label out of range");
    if (truth[i] == pred[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  double sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom > 0) sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return sum / classes;
}

double micro_f1(std::span<const Polarity> truth, std::span<const Polarity> pred) {
  return micro_f1(indices(truth), indices(pred), kPolarityClasses);
}

double macro_f1(std::span<const Polarity> truth, std::span<const Polarity> pred) {
  return macro_f1(indices(truth), indices(pred), kPolarityClasses);
}

EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> gold) {
  require_aligned(predictions.size(), gold.size(), "evaluate");
  EvalReport r;
  r.n_samples = gold.size();
  if (gold.empty()) return r;
  std::vector<int> pt, pp;
  std::vector<double> it, ip;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    pt.push_back(static_cast<int>(gold[i].polarity));
    pp.push_back(static_cast<int>(predictions[i].polarity));
    it.push_back(signed_intensity(gold[i].polarity, gold[i].intensity));
    ip.push_back(signed_intensity(predictions[i].polarity, predictions[i].intensity));
  }
  r.mif1 = 100.0 * micro_f1(pt, pp, kPolarityClasses);
  r.maf1 = 100.0 * macro_f1(pt, pp, kPolarityClasses);
  if (gold.size() >= 2) {
    const auto s = spearman(ip, it);
    const auto p = pearson(ip, it);
    r.r_s = 100.0 * s.value;
    r.r_s_degenerate = s.degenerate;
    r.r = 100.0 * p.value;
    r.r_degenerate = p.degenerate;
  }
  return r;
}

std::map<Belief, EvalReport> evaluate_by_belief(std::span<const Label> predictions,
                                                std::span<const Label> gold,
                                                std::span<const std::vector<Belief>> beliefs) {
  require_aligned(predictions.size(), gold.size(), "evaluate_by_belief");
  require_aligned(beliefs.size(), gold.size(), "evaluate_by_belief");
  std::map<Belief, std::pair<std::vector<Label>, std::vector<Label>>> groups;
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (Belief b : beliefs[i]) {
      groups[b].first.push_back(predictions[i]);
      groups[b].second.push_back(gold[i]);
    }
  std::map<Belief, EvalReport> out;
  for (const auto& [b, g] : groups) out.emplace(b, evaluate(g.first, g.second));
  return out;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_samples"] = r.n_samples;
  j["r_s"] = round2(r.r_s);
  j["r"] = round2(r.r);
  j["mif1"] = round2(r.mif1);
  j["maf1"] = round2(r.maf1);
  j["r_s_degenerate"] = r.r_s_degenerate;
  j["r_degenerate"] = r.r_degenerate;
  if (r.failures) j["failures"] = r.failures;
  if (!r.by_belief.empty()) {
    nlohmann::ordered_json seg;
    for (const auto& [b, sub] : r.by_belief) seg[std::string(to_string(b))] = report_json(sub);
    j["by_belief"] = seg;
  }
  for (const auto& [name, sub] : r.subsets) j[name] = report_json(sub);
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

}  // namespace beliefcast
