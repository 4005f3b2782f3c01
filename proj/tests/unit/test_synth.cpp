#include "beliefcast/synth.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace beliefcast;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.n_users = 80;
  c.n_news = 3;
  c.responses_per_news = 50;
  c.history_posts = 55;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("planted labels follow the stance sum") {
  std::array<double, kBeliefCount> stance{};
  stance[static_cast<std::size_t>(Belief::Care)] = 1.4;
  stance[static_cast<std::size_t>(Belief::Power)] = -0.6;
  stance[static_cast<std::size_t>(Belief::Loyalty)] = -2.0;
  auto r = planted_label({Belief::Care}, stance, 0.5);
  CHECK(r.polarity == Polarity::Positive);
  CHECK(r.intensity == 1);
  r = planted_label({Belief::Care, Belief::Power}, stance, 0.5);
  CHECK(r.polarity == Polarity::Positive);
  CHECK(r.intensity == 0);
  r = planted_label({Belief::Care, Belief::Power, Belief::Loyalty}, stance, 0.5);
  CHECK(r.polarity == Polarity::Negative);
  CHECK(r.intensity == 1);
  r = planted_label({Belief::Power}, stance, 0.7);
  CHECK(r.polarity == Polarity::Neutral);
  CHECK(r.intensity == 0);
  CHECK(planted_label({Belief::Loyalty, Belief::Loyalty}, stance, 0.5).intensity == 3);
}

TEST_CASE("generated worlds are valid and reproducible") {
  const World a = generate_world(small());
  const World b = generate_world(small());
  CHECK(a.dataset == b.dataset);
  CHECK(a.gold_personas == b.gold_personas);
  CHECK_NOTHROW(validate(a.dataset));
  CHECK(a.dataset.users.size() == 80);
  CHECK(a.dataset.news.size() == 3);
  CHECK(a.dataset.responses.size() == 150);
  CHECK(a.gold_personas.size() == 80);
  for (const auto& p : a.gold_personas) CHECK(p.beliefs().size() == 3);
  for (Split s : {Split::Train, Split::Dev, Split::Test}) CHECK_FALSE(a.dataset.split(s).empty());

  auto other = small();
  other.seed = 8;
  CHECK_FALSE(generate_world(other).dataset == a.dataset);
}

TEST_CASE("world files are byte-identical across runs") {
  fixtures::TempDir t1("synth1"), t2("synth2");
  write_world(generate_world(small()), t1.path());
  write_world(generate_world(small()), t2.path());
  for (const char* f : {"users.jsonl", "news.jsonl", "responses.jsonl", "follows.tsv", "gold_personas.jsonl"}) {
    CHECK(std::filesystem::exists(t1 / f));
    CHECK(fixtures::slurp(t1 / f) == fixtures::slurp(t2 / f));
  }
  CHECK(load_dataset(t1.path()) == generate_world(small()).dataset);
}

TEST_CASE("lurkers get short histories and match the configured share") {
  const World w = generate_world(small());
  const WorldStats s = world_statistics(w.dataset, w.gold_personas);
  CHECK(s.lurkers == 48);
  CHECK(s.users == 80);
  CHECK(s.responses == 150);
  std::size_t total = 0;
  for (auto c : s.polarity_counts) total += c;
  CHECK(total == 150);
  CHECK(s.distant_shared_belief_ratio >= 0.0);
  CHECK(s.distant_shared_belief_ratio <= 1.0);
}

TEST_CASE("noise-free labels equal the planted function") {
  auto c = small();
  c.label_noise = 0.0;
  const World w = generate_world(c);
  for (const auto& r : w.dataset.responses) {
    const auto u = std::find_if(w.gold_personas.begin(), w.gold_personas.end(),
                                [&](const auto& p) { return p.user_id == r.user_id; });
    const auto n = std::find_if(w.dataset.news.begin(), w.dataset.news.end(),
                                [&](const auto& x) { return x.id == r.news_id; });
    const auto planted = planted_label(u->beliefs(), w.stance[n - w.dataset.news.begin()], c.theta);
    CHECK(r.polarity == planted.polarity);
    CHECK(r.intensity == planted.intensity);
  }
}

TEST_CASE("invalid synth configs are rejected") {
  auto c = small();
  c.n_users = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small();
  c.responses_per_news = 81;
  CHECK_THROWS_AS(generate_world(c), std::invalid_argument);
  c = small();
  c.label_noise = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small();
  c.beliefs_per_user = 21;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small();
  c.p_follow_intra = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
