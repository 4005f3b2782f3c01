#include <deque>
#include <sstream>

#include "beliefcast/prompts.hpp"
#include "beliefcast/zeroshot.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace beliefcast;

namespace {

class CountingClient : public LlmClient {
 public:
  explicit CountingClient(std::string reply) : reply_(std::move(reply)) {}
  std::vector<std::string> prompts;

 protected:
  std::string do_complete(const ChatRequest& r) override {
    prompts.push_back(r.messages.back().content);
    return reply_;
  }

 private:
  std::string reply_;
};

Dataset dataset() {
  Dataset d;
  d.users = {{"a", "I value care", {"care"}, 5},  {"b", "power", {}, 9}, {"c", "", {}, 9},
             {"d", "tradition", {}, 1}, {"e", "", {}, 0}};
  d.news = {{"n1", "Hospitals expand"}};
  d.responses = {{"a", "n1", Polarity::Positive, 2, Split::Train},
                 {"b", "n1", Polarity::Negative, 1, Split::Test},
                 {"d", "n1", Polarity::Neutral, 0, Split::Test},
                 {"e", "n1", Polarity::Positive, 1, Split::Dev}};
  d.follows = {{"a", "b"}, {"c", "a"}, {"a", "d"}, {"d", "a"}};
  d.reindex();
  return d;
}

}  // namespace

TEST_CASE("prediction parsing accepts loose spellings") {
  const auto p = parse_prediction("polarity=positive; intensity=2");
  CHECK(p.polarity == Polarity::Positive);
  CHECK(p.intensity == 2);
  const auto q = parse_prediction("Sure. Intensity: 3, Polarity: \"NEGATIVE\".");
  CHECK(q.polarity == Polarity::Negative);
  CHECK(q.intensity == 3);
  CHECK(parse_prediction("POLARITY = neutral\nINTENSITY = 0").polarity == Polarity::Neutral);
  CHECK(parse_prediction(serialize_prediction(q)).intensity == 3);
}

TEST_CASE("prediction parsing rejects missing or out-of-range fields") {
  CHECK_THROWS_AS(parse_prediction("intensity=2"), ParseError);
  CHECK_THROWS_AS(parse_prediction("polarity=happy; intensity=2"), ParseError);
  CHECK_THROWS_AS(parse_prediction("polarity=positive"), ParseError);
  CHECK_THROWS_AS(parse_prediction("polarity=positive; intensity=4"), ParseError);
  CHECK_THROWS_AS(parse_prediction("polarity=positive; intensity=-1"), ParseError);
  CHECK_THROWS_AS(parse_prediction("polarity=positive; intensity=high"), ParseError);
}

TEST_CASE("neighbors rank by follower count then id and cap at k") {
  const Dataset d = dataset();
  const HeteroGraph g = build_graph(d, {});
  CHECK(filter_neighbors(g, d, "a", 10) == std::vector<std::string>{"b", "c", "d"});
  CHECK(filter_neighbors(g, d, "a", 2) == std::vector<std::string>{"b", "c"});
  CHECK(filter_neighbors(g, d, "e", 5).empty());
  CHECK_THROWS_AS(filter_neighbors(g, d, "ghost", 5), DataError);
}

TEST_CASE("social aggregation calls the model only when neighbors exist") {
  CountingClient client("They care about community.");
  const auto empty = aggregate_social_context(client, "e", {}, {});
  CHECK(client.calls() == 0);
  CHECK(empty.summary == kNoSocialContext);

  LatentPersona p;
  p.user_id = "b";
  p.human_values = {Belief::Power};
  const auto ctx = aggregate_social_context(client, "a", {"b"}, {p});
  CHECK(client.calls() == 1);
  CHECK(ctx.summary == "They care about community.");
  CHECK(ctx.contributors == std::vector<std::string>{"b"});
  CHECK(prompts::task_of(client.prompts[0]) == prompts::kSocialTask);
  CHECK_THROWS_AS(aggregate_social_context(client, "a", {"b", "c"}, {p}), std::invalid_argument);
}

TEST_CASE("prediction prompts include the sections each mode needs") {
  const Dataset d = dataset();
  const UserRecord& u = *d.find_user("a");
  LatentPersona latent;
  latent.user_id = "a";
  const SocialContext social{"a", "Neighbors value care.", {"b"}};
  const auto base = render_prediction_prompt(d.news[0], u, ZeroShotMode::Baseline, nullptr, nullptr);
  CHECK(prompts::task_of(base) == prompts::kPredictionTask);
  CHECK(base.find(prompts::kPersonaSection) == std::string::npos);
  CHECK(prompts::section(base, prompts::kHeadlineSection).find("Hospitals expand") != std::string_view::npos);
  const auto full = render_prediction_prompt(d.news[0], u, ZeroShotMode::Social, &latent, &social);
  CHECK(prompts::section(full, prompts::kSocialSection).find("Neighbors value care.") != std::string_view::npos);
  CHECK(full.find(prompts::kPersonaSection) != std::string::npos);
  CHECK_THROWS_AS(render_prediction_prompt(d.news[0], u, ZeroShotMode::Latent, nullptr, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(render_prediction_prompt(d.news[0], u, ZeroShotMode::Social, &latent, nullptr),
                  std::invalid_argument);
}

TEST_CASE("zero-shot mode names round-trip") {
  for (auto m : {ZeroShotMode::Baseline, ZeroShotMode::Latent, ZeroShotMode::Social})
    CHECK(parse_zero_shot_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_zero_shot_mode("fancy"), std::invalid_argument);
}

TEST_CASE("zero-shot runs are deterministic and count failures") {
  const Dataset d = dataset();
  const HeteroGraph g = build_graph(d, {});
  MockClient a(3), b(3);
  ZeroShotOptions serial;
  ZeroShotOptions parallel;
  parallel.threads = 3;
  const auto r1 = run_zero_shot_eval(g, d, a, ZeroShotMode::Social, serial);
  const auto r2 = run_zero_shot_eval(g, d, b, ZeroShotMode::Social, parallel);
  REQUIRE(r1.predictions.size() == 2);
  CHECK(r1.errors.empty());
  std::ostringstream o1, o2;
  write_predictions(o1, r1.predictions);
  write_predictions(o2, r2.predictions);
  CHECK(o1.str() == o2.str());
  const auto first = nlohmann::json::parse(o1.str().substr(0, o1.str().find('\n')));
  CHECK(first["user_id"] == "b");
  CHECK(first["mode"] == "social");

  CountingClient broken("no idea");
  const auto failed = run_zero_shot_eval(g, d, broken, ZeroShotMode::Baseline);
  CHECK(failed.predictions.empty());
  CHECK(failed.errors.size() == 2);
  CHECK(failed.report.failures == 2);
  // One first attempt plus two repairs per sample.
  CHECK(broken.calls() == 6);
}
