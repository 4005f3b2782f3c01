#include "beliefcast/graph.hpp"
#include "beliefcast/persona.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace beliefcast;

namespace {

Dataset dataset() {
  Dataset d;
  d.users = {{"c", "", {}, 0}, {"a", "", {}, 0}, {"b", "", {}, 0}, {"d", "", {}, 0}};
  d.news = {{"n2", "two"}, {"n1", "one"}};
  d.responses = {{"a", "n1", Polarity::Positive, 1, Split::Train},
                 {"b", "n1", Polarity::Negative, 1, Split::Test},
                 {"a", "n1", Polarity::Positive, 2, Split::Train},
                 {"c", "n2", Polarity::Neutral, 0, Split::Dev}};
  d.follows = {{"a", "b"}, {"a", "b"}, {"b", "b"}, {"c", "a"}, {"d", "a"}};
  d.reindex();
  return d;
}

LatentPersona persona(std::string id, std::vector<Belief> human, std::vector<Belief> moral) {
  LatentPersona p;
  p.user_id = std::move(id);
  p.human_values = std::move(human);
  p.moral_values = std::move(moral);
  return p;
}

}  // namespace

TEST_CASE("build_graph sorts, dedupes and drops self-follows") {
  const auto personas = std::vector{persona("a", {Belief::Power}, {Belief::Care}), persona("b", {Belief::Power}, {})};
  const HeteroGraph g = build_graph(dataset(), personas);
  CHECK(g.users == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(g.media == std::vector<std::string>{"n1", "n2"});
  CHECK(g.beliefs.size() == kBeliefCount);
  using P = std::pair<std::string, std::string>;
  CHECK(g.follow == std::vector<P>{{"a", "b"}, {"c", "a"}, {"d", "a"}});
  // Only training responses become interaction edges.
  CHECK(g.interact == std::vector<P>{{"a", "n1"}});
  CHECK(g.beliefs_of("a") == std::vector<Belief>{Belief::Power, Belief::Care});
  CHECK(g.beliefs_of("c").empty());
  CHECK_NOTHROW(check_integrity(g));
}

TEST_CASE("personas for unknown users are rejected") {
  CHECK_THROWS_AS(build_graph(dataset(), {persona("zz", {Belief::Power}, {})}), DataError);
}

TEST_CASE("ablation removes the right relations") {
  const auto personas = std::vector{persona("a", {Belief::Power}, {})};
  GraphOptions opts;
  opts.ablation.without_belief = true;
  const HeteroGraph nb = build_graph(dataset(), personas, opts);
  CHECK(nb.beliefs.empty());
  CHECK(nb.belief_edges.empty());
  CHECK_FALSE(nb.interact.empty());

  opts = {};
  opts.ablation.without_user_news = true;
  opts.ablation.without_history = true;  // text flags leave the graph alone
  const HeteroGraph nu = build_graph(dataset(), personas, opts);
  CHECK(nu.interact.empty());
  CHECK_FALSE(nu.belief_edges.empty());

  CHECK(active_relations({}) == std::vector{Relation::Follow, Relation::Interact, Relation::BelievesIn});
  AblationOptions both;
  both.without_belief = both.without_user_news = true;
  CHECK(active_relations(both) == std::vector{Relation::Follow});
}

TEST_CASE("influencer selection ranks by in-degree with id tie-break") {
  const std::vector<FollowEdge> follows{{"x", "k"}, {"y", "k"}, {"x", "j"}, {"y", "j"}, {"x", "m"}};
  CHECK(select_influencers({"z"}, follows, 3) == std::vector<std::string>{"j", "k", "m"});
  CHECK(select_influencers({"z"}, follows, 10).back() == "z");

  GraphOptions opts;
  opts.influencer_top_n = 1;
  const HeteroGraph g = build_graph(dataset(), {}, opts);
  // Responders a, b, c plus the most followed account (a, with 2 followers).
  CHECK(g.users == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("graph json round-trips and rejects corrupt input") {
  fixtures::TempDir tmp("graph");
  const HeteroGraph g = build_graph(dataset(), {persona("d", {Belief::Tradition}, {Belief::Loyalty})});
  const std::string text = to_json(g);
  CHECK(graph_from_json(text) == g);
  CHECK(to_json(graph_from_json(text)) == text);
  write_graph(tmp / "g.json", g);
  CHECK(read_graph(tmp / "g.json") == g);
  CHECK_THROWS_AS(graph_from_json("{\"users\": 3}"), DataError);
  CHECK_THROWS_AS(graph_from_json("not json"), DataError);
}

TEST_CASE("check_integrity catches unsorted lists and dangling edges") {
  HeteroGraph g;
  g.users = {"b", "a"};
  CHECK_THROWS_AS(check_integrity(g), DataError);
  g.users = {"a", "b"};
  g.follow = {{"a", "zz"}};
  CHECK_THROWS_AS(check_integrity(g), DataError);
}

TEST_CASE("neighbors follow edge direction") {
  const HeteroGraph g = build_graph(dataset(), {persona("a", {Belief::Power}, {})});
  const NodeRef a{NodeKind::User, "a"};
  const auto out = neighbors(g, a, Relation::Follow, Direction::Out);
  REQUIRE(out.size() == 1);
  CHECK(out[0].key == "b");
  CHECK(neighbors(g, a, Relation::Follow, Direction::In).size() == 2);
  CHECK(neighbors(g, a, Relation::Interact).front().key == "n1");
  CHECK(neighbors(g, a, Relation::BelievesIn).front().key == "power");
  CHECK_THROWS_AS(neighbors(g, {NodeKind::User, "ghost"}, Relation::Follow), DataError);
}

TEST_CASE("graph stats count nodes, edges and belief holders") {
  const HeteroGraph g = build_graph(
      dataset(), {persona("a", {Belief::Power}, {Belief::Care}), persona("b", {Belief::Power}, {})});
  const GraphStats s = graph_stats(g);
  CHECK(s.users == 4);
  CHECK(s.media == 2);
  CHECK(s.beliefs == kBeliefCount);
  CHECK(s.follow_edges == 3);
  CHECK(s.belief_edges == 3);
  CHECK(s.belief_histogram.at(Belief::Power) == 2);
  CHECK(s.edges() == 3 + 1 + 3);
}

TEST_CASE("distant shared belief ratio on hand-built cases") {
  HeteroGraph g;
  g.users = {"a", "b", "c"};
  g.beliefs = {Belief::Care};
  g.belief_edges = {{"a", Belief::Care}, {"c", Belief::Care}};
  // a - b - c: a and c are two hops apart.
  g.follow = {{"a", "b"}, {"c", "b"}};
  CHECK(distant_shared_belief_ratio(g) == 1.0);
  g.follow = {{"a", "b"}, {"a", "c"}, {"c", "b"}};
  CHECK(distant_shared_belief_ratio(g) == 0.0);
  g.belief_edges.clear();
  CHECK(distant_shared_belief_ratio(g) == 0.0);
}

TEST_CASE("distant shared belief ratio matches the all-pairs oracle") {
  SplitMix rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    HeteroGraph g;
    const int n = 2 + static_cast<int>(rng.below(15));
    for (int u = 0; u < n; ++u) g.users.push_back("u" + std::to_string(10 + u));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && rng.bernoulli(0.15)) g.follow.emplace_back(g.users[a], g.users[b]);
    g.beliefs = {Belief::Conformity, Belief::Tradition, Belief::Security};
    for (int u = 0; u < n; ++u)
      for (Belief b : g.beliefs)
        if (rng.bernoulli(0.3)) g.belief_edges.emplace_back(g.users[u], b);
    check_integrity(g);
    CHECK(distant_shared_belief_ratio(g) == oracle::distant_shared_belief_ratio(g));
  }
}
