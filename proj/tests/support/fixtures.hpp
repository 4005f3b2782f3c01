#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "beliefcast/gradcheck.hpp"
#include "beliefcast/graph.hpp"
#include "beliefcast/random.hpp"

namespace fixtures {

using beliefcast::SplitMix;
using beliefcast::hgt::Matrix;
using beliefcast::hgt::Sample;
using beliefcast::hgt::Topology;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("beliefcast_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct ToyGraph {
  std::array<int, 3> counts{};
  std::vector<std::pair<int, int>> follows, interacts, believes;
  Topology topology;
};

/// At most 10 nodes of all three kinds with at least one edge of every
/// forward type (so all six edge types are present). Node ids follow the
/// topology numbering.
inline ToyGraph random_toy_graph(std::uint64_t seed) {
  SplitMix rng(seed);
  ToyGraph g;
  const int users = 3 + static_cast<int>(rng.below(3));  // 3..5
  const int media = 2 + static_cast<int>(rng.below(2));  // 2..3
  const int beliefs = 2;
  g.counts = {users, media, beliefs};
  std::set<std::pair<int, int>> f, i, b;
  f.insert({0, 1});
  i.insert({0, users});
  b.insert({1, users + media});
  for (int k = 0; k < 2 * users; ++k) {
    const int a = static_cast<int>(rng.below(users)), c = static_cast<int>(rng.below(users));
    if (a != c) f.insert({a, c});
  }
  for (int k = 0; k < users; ++k) {
    i.insert({static_cast<int>(rng.below(users)), users + static_cast<int>(rng.below(media))});
    b.insert({static_cast<int>(rng.below(users)), users + media + static_cast<int>(rng.below(beliefs))});
  }
  g.follows.assign(f.begin(), f.end());
  g.interacts.assign(i.begin(), i.end());
  g.believes.assign(b.begin(), b.end());
  g.topology = Topology::from_forward_edges(g.counts, g.follows, g.interacts, g.believes);
  return g;
}

inline Matrix<double> random_features(int dim, int nodes, SplitMix& rng) {
  Matrix<double> x(dim, nodes);
  for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = rng.uniform(-1.0, 1.0);
  return x;
}

/// Initialized parameters with biases and attention priors perturbed away
/// from their init values, so every tensor carries a non-trivial gradient.
inline beliefcast::hgt::HgtParams<double> random_params(const beliefcast::hgt::HgtConfig& cfg, std::uint64_t seed) {
  SplitMix rng(beliefcast::mix_seed(seed, 77));
  auto p = beliefcast::hgt::init_params<double>(cfg, seed);
  for (auto& t : beliefcast::hgt::tensors(p))
    if (t.map.cols() == 1)
      for (Eigen::Index j = 0; j < t.map.size(); ++j) t.map.data()[j] += rng.uniform(-0.3, 0.3);
  return p;
}

/// (user, media) samples with labels drawn uniformly.
inline std::vector<Sample> random_samples(const ToyGraph& g, int count, SplitMix& rng) {
  std::vector<Sample> out;
  for (int k = 0; k < count; ++k)
    out.push_back({{static_cast<int>(rng.below(g.counts[0])), g.counts[0] + static_cast<int>(rng.below(g.counts[1]))},
                   static_cast<int>(rng.below(3)),
                   static_cast<int>(rng.below(4))});
  return out;
}

}  // namespace fixtures
