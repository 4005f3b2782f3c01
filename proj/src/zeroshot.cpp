#include "beliefcast/zeroshot.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "beliefcast/prompts.hpp"
#include "json.hpp"

namespace beliefcast {

std::string_view to_string(ZeroShotMode m) {
  switch (m) {
    case ZeroShotMode::Baseline: return "baseline";
    case ZeroShotMode::Latent: return "latent";
    case ZeroShotMode::Social: return "social";
  }
  return "baseline";
}

ZeroShotMode parse_zero_shot_mode(std::string_view text) {
  if (text == "baseline") return ZeroShotMode::Baseline;
  if (text == "latent") return ZeroShotMode::Latent;
  if (text == "social") return ZeroShotMode::Social;
  throw std::invalid_argument("unknown zero-shot mode \"" + std::string(text) + "\"");
}

std::vector<std::string> filter_neighbors(const HeteroGraph& graph, const Dataset& dataset,
                                          std::string_view user_id, std::size_t k) {
  if (!graph.user_index(user_id)) throw DataError("unknown user \"" + std::string(user_id) + "\"");
  std::vector<std::string> ids;
  for (const auto& [a, b] : graph.follow) {
    if (a == user_id && b != user_id) ids.push_back(b);
    if (b == user_id && a != user_id) ids.push_back(a);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<std::pair<std::int64_t, std::string>> ranked;
  for (auto& id : ids) {
    const UserRecord* u = dataset.find_user(id);
    if (!u) throw DataError("no user record for neighbor \"" + id + "\"");
    ranked.emplace_back(u->follower_count, std::move(id));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(std::move(ranked[i].second));
  return out;
}

std::string render_social_prompt(const std::vector<LatentPersona>& neighbor_personas) {
  std::ostringstream out;
  out << prompts::kTaskPrefix << prompts::kSocialTask << "\n"
      << "The personas below belong to the most influential accounts this user follows or is "
         "followed by, most influential first. Summarize the beliefs, values and views this "
         "social environment is likely to reinforce in the user, in two or three sentences.\n";
  out << "\n## " << prompts::kNeighborsSection << "\n";
  for (const auto& p : neighbor_personas) out << "- " << serialize(p) << "\n";
  return out.str();
}

SocialContext aggregate_social_context(LlmClient& client, std::string_view user_id,
                                       const std::vector<std::string>& neighbor_ids,
                                       const std::vector<LatentPersona>& neighbor_personas) {
  if (neighbor_ids.size() != neighbor_personas.size())
    throw std::invalid_argument("aggregate_social_context: one persona per neighbor required");
  SocialContext ctx{std::string(user_id), std::string(kNoSocialContext), neighbor_ids};
  if (neighbor_ids.empty()) return ctx;
  ctx.summary = trim(client.complete(make_request(render_social_prompt(neighbor_personas))));
  return ctx;
}

std::string render_prediction_prompt(const NewsItem& news, const UserRecord& user, ZeroShotMode mode,
                                     const LatentPersona* latent, const SocialContext* social,
                                     std::size_t history_cap) {
  std::ostringstream out;
  out << prompts::kTaskPrefix << prompts::kPredictionTask << "\n"
      << "Predict how the social media user described below will respond to the news headline: "
         "the sentiment polarity of the reply and its intensity from 0 (none) to 3 (strong).\n";
  out << "\n## " << prompts::kProfileSection << "\n";
  const std::string profile = trim(user.profile);
  out << (profile.empty() ? std::string(prompts::kNoProfile) : profile) << "\n";
  out << "\n## " << prompts::kPostsSection << "\n";
  const std::size_t take = std::min(history_cap, user.history.size());
  if (take == 0) out << prompts::kNoPosts << "\n";
  for (std::size_t i = user.history.size() - take; i < user.history.size(); ++i)
    out << "- " << user.history[i] << "\n";
  if (mode != ZeroShotMode::Baseline) {
    if (!latent) throw std::invalid_argument("prediction prompt: mode requires a latent persona");
    out << "\n## " << prompts::kPersonaSection << "\n" << serialize(*latent) << "\n";
  }
  if (mode == ZeroShotMode::Social) {
    if (!social) throw std::invalid_argument("prediction prompt: social mode requires a social context");
    out << "\n## " << prompts::kSocialSection << "\n" << social->summary << "\n";
  }
  out << "\n## " << prompts::kHeadlineSection << "\n" << news.headline << "\n";
  out << "\n## " << prompts::kFormatSection << "\n"
      << "Reply with exactly one line: polarity=<positive|neutral|negative>; intensity=<0-3>\n";
  return out.str();
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Position just past "<key>" followed by optional spaces and a ':' or '='.
std::optional<std::size_t> field_value(const std::string& text, std::string_view key) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + 1)) {
    std::size_t i = pos + key.size();
    while (i < text.size() && text[i] == ' ') ++i;
    if (i < text.size() && (text[i] == '=' || text[i] == ':')) {
      ++i;
      while (i < text.size() && (text[i] == ' ' || text[i] == '"' || text[i] == '\'')) ++i;
      return i;
    }
  }
  return std::nullopt;
}

}  // namespace

ZeroShotPrediction parse_prediction(std::string_view text) {
  const std::string t = lower(text);
  ZeroShotPrediction p;
  p.raw = std::string(text);

  const auto pv = field_value(t, "polarity");
  if (!pv) throw ParseError("prediction: missing polarity", p.raw);
  std::size_t end = *pv;
  while (end < t.size() && std::isalpha(static_cast<unsigned char>(t[end]))) ++end;
  const std::string word = t.substr(*pv, end - *pv);
  if (word == "positive") p.polarity = Polarity::Positive;
  else if (word == "negative") p.polarity = Polarity::Negative;
  else if (word == "neutral") p.polarity = Polarity::Neutral;
  else throw ParseError("prediction: bad polarity \"" + word + "\"", p.raw);

  const auto iv = field_value(t, "intensity");
  if (!iv) throw ParseError("prediction: missing intensity", p.raw);
  end = *iv;
  while (end < t.size() && std::isdigit(static_cast<unsigned char>(t[end]))) ++end;
  if (end == *iv || end - *iv > 3) throw ParseError("prediction: bad intensity", p.raw);
  p.intensity = std::stoi(t.substr(*iv, end - *iv));
  if (p.intensity > 3) throw ParseError("prediction: intensity out of range", p.raw);
  return p;
}

std::string serialize_prediction(const ZeroShotPrediction& p) {
  return "polarity=" + std::string(to_string(p.polarity)) + "; intensity=" + std::to_string(p.intensity);
}

ZeroShotPrediction predict_zero_shot(LlmClient& client, const NewsItem& news, const UserRecord& user,
                                     ZeroShotMode mode, const LatentPersona* latent, const SocialContext* social,
                                     const ZeroShotOptions& options) {
  ChatRequest request = make_request(render_prediction_prompt(news, user, mode, latent, social, options.history_cap));
  for (int attempt = 0;; ++attempt) {
    std::string raw = client.complete(request);
    try {
      return parse_prediction(raw);
    } catch (const ParseError&) {
      if (attempt >= options.max_retries) throw;
      request.messages.push_back({"assistant", raw});
      request.messages.push_back(
          {"user", "Your previous answer could not be parsed. Reply with exactly one line: "
                   "polarity=<positive|neutral|negative>; intensity=<0-3>"});
    }
  }
}

ZeroShotRun run_zero_shot_eval(const HeteroGraph& graph, const Dataset& dataset, LlmClient& client,
                               ZeroShotMode mode, const ZeroShotOptions& options,
                               const std::vector<LatentPersona>* known_personas, PersonaCache* cache) {
  const auto samples = dataset.split(Split::Test);
  if (samples.empty()) throw DataError("zero-shot evaluation needs a non-empty test split");

  std::map<std::string, LatentPersona, std::less<>> known;
  if (known_personas)
    for (const auto& p : *known_personas) known.emplace(p.user_id, p);
  PersonaCache local_cache;
  PersonaCache& personas = cache ? *cache : local_cache;
  const PersonaOptions persona_options{options.history_cap, options.max_retries};

  auto persona_of = [&](const std::string& id) {
    if (auto it = known.find(id); it != known.end()) return it->second;
    const UserRecord* u = dataset.find_user(id);
    if (!u) throw DataError("unknown user \"" + id + "\"");
    return extract_latent_persona(client, *u, persona_options, &personas);
  };

  std::mutex context_mutex;
  std::map<std::string, SocialContext> contexts;
  auto context_of = [&](const std::string& id) {
    {
      std::lock_guard lock(context_mutex);
      if (auto it = contexts.find(id); it != contexts.end()) return it->second;
    }
    const auto neighbors = filter_neighbors(graph, dataset, id, options.k);
    std::vector<LatentPersona> neighbor_personas;
    for (const auto& n : neighbors) neighbor_personas.push_back(persona_of(n));
    SocialContext ctx = aggregate_social_context(client, id, neighbors, neighbor_personas);
    std::lock_guard lock(context_mutex);
    return contexts.emplace(id, std::move(ctx)).first->second;
  };

  std::vector<std::optional<ZeroShotPrediction>> results(samples.size());
  std::vector<std::string> errors(samples.size());
  auto run_one = [&](std::size_t i) {
    const auto& s = samples[i];
    try {
      const UserRecord* user = dataset.find_user(s.user_id);
      const NewsItem* news = dataset.find_news(s.news_id);
      if (!user || !news) throw DataError("sample references unknown records");
      std::optional<LatentPersona> latent;
      std::optional<SocialContext> social;
      if (mode != ZeroShotMode::Baseline) latent = persona_of(s.user_id);
      if (mode == ZeroShotMode::Social) social = context_of(s.user_id);
      results[i] = predict_zero_shot(client, *news, *user, mode, latent ? &*latent : nullptr,
                                     social ? &*social : nullptr, options);
    } catch (const std::exception& e) {
      errors[i] = s.user_id + "\t" + s.news_id + "\t" + e.what();
    }
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) run_one(i);
      });
  }

  ZeroShotRun run;
  std::vector<Label> predicted, gold;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!results[i]) {
      run.errors.push_back(errors[i]);
      continue;
    }
    run.predictions.push_back({samples[i].user_id, samples[i].news_id, mode, *results[i]});
    predicted.push_back({results[i]->polarity, results[i]->intensity});
    gold.push_back({samples[i].polarity, samples[i].intensity});
  }
  run.report = evaluate(predicted, gold);
  run.report.failures = run.errors.size();
  return run;
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
  for (const auto& r : records) {
    const nlohmann::json j = {{"user_id", r.user_id},
                              {"news_id", r.news_id},
                              {"mode", std::string(to_string(r.mode))},
                              {"polarity", std::string(to_string(r.prediction.polarity))},
                              {"intensity", r.prediction.intensity},
                              {"raw", r.prediction.raw}};
    out << j.dump() << '\n';
  }
}

}  // namespace beliefcast
