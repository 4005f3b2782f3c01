#include <cmath>
#include <sstream>

#include "beliefcast/embed.hpp"
#include "beliefcast/random.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace beliefcast;

namespace {

Dataset dataset() {
  Dataset d;
  d.users = {{"u1", "I like tea", {"tea is great", "so is coffee"}, 3}, {"u2", "", {}, 0}};
  d.news = {{"n1", "Tea prices rise"}};
  d.responses = {{"u1", "n1", Polarity::Positive, 1, Split::Train}};
  d.follows = {{"u2", "u1"}};
  d.reindex();
  return d;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits on non-word characters") {
  CHECK(tokenize("Hello, World! x2") == std::vector<std::string>{"hello", "world", "x2"});
  CHECK(tokenize("  --  ").empty());
  CHECK(tokenize("caf\xc3\xa9 au-lait") == std::vector<std::string>{"caf\xc3\xa9", "au", "lait"});
}

TEST_CASE("hash features are unit length, signed and deterministic") {
  SplitMix rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const int words = 1 + static_cast<int>(rng.below(20));
    for (int w = 0; w < words; ++w) text += "w" + std::to_string(rng.below(40)) + " ";
    const int dim = 1 + static_cast<int>(rng.below(64));
    const Embedding v = hash_featurize(text, dim);
    REQUIRE(v.size() == dim);
    // A single dimension can cancel to zero; otherwise the vector has unit norm.
    if (v.squaredNorm() > 0) CHECK(v.cast<double>().norm() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hash_featurize(text, dim) == v);
  }
  CHECK(hash_featurize("", 8).isZero());
  CHECK(hash_featurize("Tea TEA", 16) == hash_featurize("tea", 16));
  CHECK_THROWS_AS(hash_featurize("x", 0), EmbedError);
}

TEST_CASE("one token sets a single +-1 coordinate at its FNV-1a bucket") {
  const Embedding v = hash_featurize("belief", 32);
  const std::uint64_t h = fnv1a64("belief");
  const int idx = static_cast<int>(h % 32);
  const float sign = (h >> 63) ? -1.0f : 1.0f;
  CHECK(v[idx] == sign);
  CHECK(v.cwiseAbs().sum() == 1.0f);
}

TEST_CASE("seeded random vectors are bounded and keyed") {
  const Embedding a = seeded_node_vector(1, "user:a", 64);
  const float bound = 1.0f / std::sqrt(64.0f);
  CHECK(a.cwiseAbs().maxCoeff() <= bound);
  CHECK(a == seeded_node_vector(1, "user:a", 64));
  CHECK(a != seeded_node_vector(2, "user:a", 64));
  CHECK(a != seeded_node_vector(1, "user:b", 64));
  const auto beliefs = init_belief_embeddings(3, 16);
  CHECK(beliefs.size() == kBeliefCount);
  CHECK(beliefs[0] != beliefs[1]);
  CHECK(node_key(NodeKind::Belief, "care") == "belief:care");
}

TEST_CASE("user text ablations change user vectors only") {
  const Dataset d = dataset();
  const HeteroGraph g = build_graph(d, {});
  const HashProvider hp(32);
  const EmbeddingTable full = build_table(g, d, hp, {}, 1);
  CHECK(full.size() == 2 + 1 + kBeliefCount);

  AblationOptions no_history;
  no_history.without_history = true;
  const EmbeddingTable nh = build_table(g, d, hp, no_history, 1);
  CHECK(nh.at("user:u1") != full.at("user:u1"));
  CHECK(nh.at("media:n1") == full.at("media:n1"));
  CHECK(nh.at("user:u1") == hash_featurize("I like tea\n", 32));

  AblationOptions neither = no_history;
  neither.without_profile = true;
  CHECK(build_table(g, d, hp, neither, 1).at("user:u1") == seeded_node_vector(1, "user:u1", 32));

  AblationOptions random;
  random.random_init = true;
  const EmbeddingTable r = build_table(g, d, hp, random, 1);
  CHECK(r.at("media:n1") == seeded_node_vector(1, "media:n1", 32));
  CHECK(r.at("belief:care") == full.at("belief:care"));
}

TEST_CASE("embeddings.bin round-trips and rejects corrupt input") {
  const Dataset d = dataset();
  const EmbeddingTable t = build_table(build_graph(d, {}), d, HashProvider(8), {}, 4);
  std::stringstream buf;
  write_embeddings(buf, t);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SSEB");
  std::istringstream in(bytes);
  CHECK(read_embeddings(in) == t);
  std::istringstream cut(bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(read_embeddings(cut), EmbedError);
  std::istringstream junk("JUNKJUNK");
  CHECK_THROWS_AS(read_embeddings(junk), EmbedError);

  fixtures::TempDir tmp("embed");
  write_embeddings(tmp / "e.bin", t);
  CHECK(read_embeddings(tmp / "e.bin") == t);
}

TEST_CASE("file provider serves stored vectors and names missing keys") {
  EmbeddingTable t;
  t.dim = 2;
  t.vectors["user:u1"] = Embedding::Ones(2);
  const FileProvider fp(t);
  CHECK_FALSE(fp.uses_text());
  CHECK(fp.encode("user:u1", "ignored") == Embedding::Ones(2));
  CHECK_THROWS_WITH_AS(fp.encode("media:zz", ""), doctest::Contains("\"zz\""), EmbedError);
  CHECK_THROWS_AS(t.at("user:nobody"), EmbedError);
}
