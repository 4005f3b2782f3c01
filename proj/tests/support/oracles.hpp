#pragma once

// Deliberately naive reference implementations. They share no code with the
// library and favor obviousness over speed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "beliefcast/graph.hpp"

namespace oracle {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y, bool* degenerate = nullptr) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const bool flat = sxx == 0 || syy == 0;
  if (degenerate) *degenerate = flat;
  return flat ? 0.0 : static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Rank of x[i] = 1 + #{j : x[j] < x[i]} + (#{j != i : x[j] == x[i]}) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) ++less;
      if (j != i && x[j] == x[i]) ++equal;
    }
    r[i] = 1.0 + less + equal / 2.0;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y, bool* degenerate = nullptr) {
  return pearson(ranks(x), ranks(y), degenerate);
}

inline double accuracy(const std::vector<int>& t, const std::vector<int>& p) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < t.size(); ++i) hit += t[i] == p[i];
  return static_cast<double>(hit) / static_cast<double>(t.size());
}

// Per-class F1 from a full confusion matrix; precision and recall of an empty
// denominator are 0.
inline double macro_f1(const std::vector<int>& t, const std::vector<int>& p, int classes) {
  std::vector<std::vector<double>> conf(classes, std::vector<double>(classes, 0.0));
  for (std::size_t i = 0; i < t.size(); ++i) conf[t[i]][p[i]] += 1;
  double sum = 0;
  for (int c = 0; c < classes; ++c) {
    double tp = conf[c][c], col = 0, row = 0;
    for (int k = 0; k < classes; ++k) {
      col += conf[k][c];
      row += conf[c][k];
    }
    const double precision = col == 0 ? 0 : tp / col;
    const double recall = row == 0 ? 0 : tp / row;
    sum += precision + recall == 0 ? 0 : 2 * precision * recall / (precision + recall);
  }
  return sum / classes;
}

// Floyd-Warshall over the undirected follow graph, then a scan of all user
// pairs that share a belief.
inline double distant_shared_belief_ratio(const beliefcast::HeteroGraph& g) {
  const std::size_t n = g.users.size();
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, kInf));
  auto idx = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(g.users.begin(), g.users.end(), id) - g.users.begin());
  };
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& [a, b] : g.follow) {
    const auto i = idx(a), j = idx(b);
    if (i != j) d[i][j] = d[j][i] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  std::vector<std::set<beliefcast::Belief>> held(n);
  for (const auto& [u, b] : g.belief_edges) held[idx(u)].insert(b);
  std::size_t holders = 0, distant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (held[i].empty()) continue;
    ++holders;
    bool found = false;
    for (std::size_t j = 0; j < n && !found; ++j) {
      if (j == i || d[i][j] < 2) continue;
      for (auto b : held[i])
        if (held[j].count(b)) found = true;
    }
    distant += found;
  }
  return holders == 0 ? 0.0 : static_cast<double>(distant) / static_cast<double>(holders);
}

}  // namespace oracle
