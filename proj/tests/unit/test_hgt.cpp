#include <sstream>

#include "beliefcast/checkpoint.hpp"
#include "beliefcast/gradcheck.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace beliefcast;
using namespace beliefcast::hgt;

namespace {

HgtConfig small_config(Activation a = Activation::Relu, double dropout = 0.0) {
  HgtConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 4;
  c.dropout = dropout;
  c.activation = a;
  return c;
}

}  // namespace

TEST_CASE("topology orders incoming edges by type then list position") {
  // users 0,1; media 2; belief 3
  const Topology t = Topology::from_forward_edges({2, 1, 1}, {{1, 0}}, {{0, 2}, {1, 2}}, {{0, 3}});
  CHECK(t.nodes() == 4);
  CHECK(t.edge_count() == 8);
  // User 0 receives followed-by (from 1), interacted-by (from 2), believed-by (from 3).
  REQUIRE(t.in_degree(0) == 3);
  const int lo = t.in_begin[0];
  CHECK(t.in_type[lo] == EdgeType::Follows);
  CHECK(t.in_source[lo] == 1);
  CHECK(t.in_type[lo + 1] == EdgeType::InteractedBy);
  CHECK(t.in_type[lo + 2] == EdgeType::BelievedBy);
  CHECK(t.kind_of(2) == NodeKind::Media);
  CHECK(t.kind_of(3) == NodeKind::Belief);
  CHECK_THROWS_AS(Topology::from_forward_edges({2, 1, 1}, {{0, 2}}, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Topology::from_forward_edges({2, 1, 1}, {}, {{0, 3}}, {}), std::invalid_argument);
}

TEST_CASE("edge type metadata is consistent") {
  for (int e = 0; e < kEdgeTypes; ++e) {
    const auto t = static_cast<EdgeType>(e);
    CHECK(reverse(reverse(t)) == t);
    CHECK(source_kind(reverse(t)) == target_kind(t));
  }
}

TEST_CASE("config validation") {
  HgtConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.dim = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_activation(to_string(Activation::Tanh)) == Activation::Tanh);
  CHECK_THROWS_AS(parse_activation("gelu"), std::invalid_argument);
}

TEST_CASE("attention weights sum to one per target and head") {
  SplitMix rng(1);
  const auto g = fixtures::random_toy_graph(4);
  const auto cfg = small_config();
  const auto params = fixtures::random_params(cfg, 2);
  const auto x = fixtures::random_features(cfg.dim, g.topology.nodes(), rng);
  const auto t = hgt_layer_forward(x, g.topology, params.layers[0], cfg, Mode::Eval, 0);
  for (int n = 0; n < g.topology.nodes(); ++n) {
    if (g.topology.in_degree(n) == 0) continue;
    for (int h = 0; h < cfg.heads; ++h) {
      double sum = 0;
      for (int j = g.topology.in_begin[n]; j < g.topology.in_begin[n + 1]; ++j) {
        CHECK(t.attention(h, j) >= 0.0);
        sum += t.attention(h, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("nodes without incoming edges copy their input") {
  // User 1 has no edges at all.
  const Topology t = Topology::from_forward_edges({2, 1, 1}, {}, {{0, 2}}, {{0, 3}});
  SplitMix rng(3);
  const auto cfg = small_config(Activation::Relu, 0.5);
  const auto params = fixtures::random_params(cfg, 5);
  const auto x = fixtures::random_features(cfg.dim, t.nodes(), rng);
  for (Mode m : {Mode::Eval, Mode::Train}) {
    const auto out = hgt_layer_forward(x, t, params.layers[0], cfg, m, 9);
    CHECK(out.output.col(1) == x.col(1));
    CHECK(out.output.col(0) != x.col(0));
  }
}

TEST_CASE("eval mode ignores dropout and train mode is seeded") {
  SplitMix rng(2);
  const auto g = fixtures::random_toy_graph(6);
  const auto cfg = small_config(Activation::Relu, 0.3);
  const auto params = fixtures::random_params(cfg, 1);
  const auto x = fixtures::random_features(cfg.dim, g.topology.nodes(), rng);
  const std::vector<NodePair> pairs{{0, g.counts[0]}};
  const auto e1 = model_forward(g.topology, x, params, cfg, pairs, Mode::Eval, 1);
  const auto e2 = model_forward(g.topology, x, params, cfg, pairs, Mode::Eval, 2);
  CHECK(e1.logits == e2.logits);
  const auto t1 = model_forward(g.topology, x, params, cfg, pairs, Mode::Train, 7);
  const auto t2 = model_forward(g.topology, x, params, cfg, pairs, Mode::Train, 7);
  const auto t3 = model_forward(g.topology, x, params, cfg, pairs, Mode::Train, 8);
  CHECK(t1.logits == t2.logits);
  CHECK(t1.logits != t3.logits);
}

TEST_CASE("forward rejects mismatched shapes and pairs") {
  SplitMix rng(4);
  const auto g = fixtures::random_toy_graph(1);
  const auto cfg = small_config();
  const auto params = fixtures::random_params(cfg, 1);
  const auto x = fixtures::random_features(cfg.dim, g.topology.nodes(), rng);
  const std::vector<NodePair> bad{{g.counts[0], 0}};
  CHECK_THROWS_AS(model_forward(g.topology, x, params, cfg, bad, Mode::Eval), std::invalid_argument);
  const auto narrow = fixtures::random_features(cfg.dim + 2, g.topology.nodes(), rng);
  const std::vector<NodePair> ok{{0, g.counts[0]}};
  CHECK_THROWS_AS(model_forward(g.topology, narrow, params, cfg, ok, Mode::Eval), std::invalid_argument);
  auto deeper = cfg;
  deeper.layers = 3;
  CHECK_THROWS_AS(model_forward(g.topology, x, params, deeper, ok, Mode::Eval), std::invalid_argument);
}

TEST_CASE("non-finite features raise NumericError") {
  SplitMix rng(4);
  const auto g = fixtures::random_toy_graph(1);
  const auto cfg = small_config();
  const auto params = fixtures::random_params(cfg, 1);
  auto x = fixtures::random_features(cfg.dim, g.topology.nodes(), rng);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<NodePair> ok{{0, g.counts[0]}};
  CHECK_THROWS_AS(model_forward(g.topology, x, params, cfg, ok, Mode::Eval), NumericError);
}

TEST_CASE("analytic gradients match central differences") {
  struct Case {
    Activation activation;
    double dropout;
    Task task;
  };
  for (const Case c : {Case{Activation::Tanh, 0.0, Task::Joint}, Case{Activation::Relu, 0.0, Task::Polarity},
                       Case{Activation::Tanh, 0.4, Task::Intensity}, Case{Activation::Relu, 0.3, Task::Joint}}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      SplitMix rng(seed);
      const auto g = fixtures::random_toy_graph(seed * 13);
      const auto cfg = small_config(c.activation, c.dropout);
      const auto params = fixtures::random_params(cfg, seed);
      const auto x = fixtures::random_features(cfg.dim, g.topology.nodes(), rng);
      const auto samples = fixtures::random_samples(g, 4, rng);
      const auto r = check_gradients(g.topology, x, params, cfg, samples, 1e-5, c.task, 0.25, seed);
      INFO("worst ", r.worst_tensor, "[", r.worst_index, "] analytic ", r.analytic, " numeric ", r.numeric);
      CHECK(r.max_relative_error < 1e-4);
      CHECK(r.checked > r.kinks);
    }
  }
}

TEST_CASE("relative error uses the floor for tiny gradients") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("parameter views cover every tensor and casting round-trips") {
  const auto cfg = small_config();
  auto p = init_params<float>(cfg, 3);
  const auto views = tensors(p);
  std::set<std::string> names;
  for (const auto& v : views) names.insert(v.name);
  CHECK(names.size() == views.size());
  CHECK(names.count("head.output.weight") == 1);
  auto q = init_params<float>(cfg, 3);
  CHECK(tensors(q)[5].map == tensors(p)[5].map);
  const auto d = cast_params<double>(p);
  const auto back = cast_params<float>(d);
  auto back_copy = back;
  for (std::size_t i = 0; i < views.size(); ++i) CHECK(tensors(back_copy)[i].map == views[i].map);
}

TEST_CASE("checkpoint round-trips and rejects corrupt input") {
  Checkpoint c;
  c.config = small_config(Activation::Tanh, 0.25);
  c.task = Task::Intensity;
  c.params = init_params<float>(c.config, 11);
  std::stringstream buf;
  write_checkpoint(buf, c);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SSCK");
  std::istringstream in(bytes);
  Checkpoint back = read_checkpoint(in);
  CHECK(back.config == c.config);
  CHECK(back.task == c.task);
  auto a = tensors(c.params), b = tensors(back.params);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].map == b[i].map);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  std::istringstream bad_magic(magic);
  CHECK_THROWS_AS(read_checkpoint(bad_magic), CheckpointError);
  fixtures::TempDir tmp("ckpt");
  CHECK_THROWS_AS(read_checkpoint(tmp / "missing.bin"), CheckpointError);
  write_checkpoint(tmp / "c.bin", c);
  CHECK(read_checkpoint(tmp / "c.bin").config == c.config);
}
