#include "beliefcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "beliefcast/graph.hpp"
#include "beliefcast/random.hpp"

namespace beliefcast {

namespace {

constexpr std::array<const char*, 6> kPostTemplates = {
    "Thinking a lot about %s today.",
    "Nothing matters more to me than %s.",
    "Another reminder that %s is worth defending.",
    "People forget how important %s is.",
    "Reading up on %s again this weekend.",
    "My take: %s should guide what we do next.",
};

std::string format_post(const char* tmpl, const std::string& word) {
  char buf[160];
  std::snprintf(buf, sizeof buf, tmpl, word.c_str());
  return buf;
}

std::string make_id(char prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("synth: ") + name + " must be in [0, 1]");
  };
  if (n_users < 2) throw std::invalid_argument("synth: n_users must be >= 2");
  if (n_communities < 1 || n_communities > n_users)
    throw std::invalid_argument("synth: n_communities must be in [1, n_users]");
  if (beliefs_per_user < 1 || beliefs_per_user > kBeliefCount)
    throw std::invalid_argument("synth: beliefs_per_user must be in [1, 20]");
  if (n_news < 1) throw std::invalid_argument("synth: n_news must be positive");
  if (responses_per_news < 1 || responses_per_news > n_users)
    throw std::invalid_argument("synth: responses_per_news must be in [1, n_users]");
  if (history_posts < 0) throw std::invalid_argument("synth: history_posts must be >= 0");
  if (!(theta >= 0.0)) throw std::invalid_argument("synth: theta must be >= 0");
  prob(p_follow_intra, "p_follow_intra");
  prob(p_follow_inter, "p_follow_inter");
  prob(lurker_fraction, "lurker_fraction");
  if (!(label_noise >= 0.0 && label_noise < 1.0)) throw std::invalid_argument("synth: label_noise must be in [0, 1)");
}

ResponseRecord planted_label(const std::vector<Belief>& beliefs, const std::array<double, kBeliefCount>& stance,
                             double theta) {
  double s = 0.0;
  for (Belief b : beliefs) s += stance[static_cast<std::size_t>(b)];
  ResponseRecord r;
  r.polarity = s > theta ? Polarity::Positive : s < -theta ? Polarity::Negative : Polarity::Neutral;
  r.intensity = std::min(3, static_cast<int>(std::floor(std::abs(s))));
  return r;
}

World generate_world(const SynthConfig& config) {
  config.validate();
  SplitMix rng(config.seed);
  World w;
  const int n = config.n_users;

  w.community.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w.community[i] = static_cast<int>(static_cast<long>(i) * config.n_communities / n);

  std::vector<std::vector<Belief>> beliefs(static_cast<std::size_t>(n));
  std::vector<int> pool(kBeliefCount);
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < kBeliefCount; ++b) pool[b] = b;
    rng.shuffle(pool);
    for (int k = 0; k < config.beliefs_per_user; ++k) beliefs[i].push_back(static_cast<Belief>(pool[k]));
    std::sort(beliefs[i].begin(), beliefs[i].end());
  }

  std::vector<int> in_degree(static_cast<std::size_t>(n), 0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const double p = w.community[a] == w.community[b] ? config.p_follow_intra : config.p_follow_inter;
      if (rng.bernoulli(p)) {
        w.dataset.follows.push_back({make_id('u', a, 4), make_id('u', b, 4)});
        ++in_degree[b];
      }
    }

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const int n_lurkers = static_cast<int>(std::lround(config.lurker_fraction * n));
  std::vector<bool> lurker(static_cast<std::size_t>(n), false);
  for (int k = 0; k < n_lurkers; ++k) lurker[order[k]] = true;

  for (int i = 0; i < n; ++i) {
    UserRecord u;
    u.id = make_id('u', i, 4);
    u.follower_count = in_degree[i] + static_cast<std::int64_t>(rng.below(20));
    if (!lurker[i]) {
      u.profile = "Community " + std::to_string(w.community[i]) + " member. I value";
      for (Belief b : beliefs[i]) u.profile += " " + keyword(b);
      u.profile += ".";
      for (int p = 0; p < config.history_posts; ++p) {
        const Belief b = beliefs[i][rng.below(beliefs[i].size())];
        u.history.push_back(format_post(kPostTemplates[rng.below(kPostTemplates.size())], keyword(b)));
      }
    }
    w.dataset.users.push_back(std::move(u));

    LatentPersona persona;
    persona.user_id = make_id('u', i, 4);
    for (Belief b : beliefs[i])
      (family(b) == BeliefFamily::MoralValue ? persona.moral_values : persona.human_values).push_back(b);
    w.gold_personas.push_back(std::move(persona));
  }

  for (int j = 0; j < config.n_news; ++j) {
    std::array<double, kBeliefCount> stance{};
    for (auto& s : stance) s = rng.uniform(-1.0, 1.0);
    NewsItem item;
    item.id = make_id('n', j, 3);
    item.headline = "Story " + std::to_string(j) + ":";
    for (int b = 0; b < kBeliefCount; ++b)
      if (auto tok = stance_token(static_cast<Belief>(b), stance[b])) item.headline += " " + *tok;
    w.dataset.news.push_back(std::move(item));
    w.stance.push_back(stance);
  }

  std::array<std::size_t, 3> split_sizes{};
  for (int j = 0; j < config.n_news; ++j) {
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<int> responders(order.begin(), order.begin() + config.responses_per_news);
    std::sort(responders.begin(), responders.end());
    for (int i : responders) {
      ResponseRecord r = planted_label(beliefs[i], w.stance[j], config.theta);
      if (rng.bernoulli(config.label_noise)) {
        r.polarity = static_cast<Polarity>(rng.below(kPolarityClasses));
        r.intensity = r.polarity == Polarity::Neutral ? 0 : static_cast<int>(rng.below(kIntensityClasses));
      }
      r.user_id = make_id('u', i, 4);
      r.news_id = make_id('n', j, 3);
      const double u = rng.uniform();
      r.split = u < 0.8 ? Split::Train : u < 0.9 ? Split::Dev : Split::Test;
      ++split_sizes[static_cast<std::size_t>(r.split)];
      w.dataset.responses.push_back(std::move(r));
    }
  }
  for (std::size_t s = 0; s < split_sizes.size(); ++s)
    if (split_sizes[s] == 0)
      throw std::invalid_argument("synth: config leaves the " + std::string(to_string(static_cast<Split>(s))) +
                                  " split empty");
  w.dataset.reindex();
  validate(w.dataset);
  return w;
}

WorldStats world_statistics(const Dataset& dataset, const std::vector<LatentPersona>& gold_personas) {
  WorldStats s;
  s.users = dataset.users.size();
  s.responses = dataset.responses.size();
  for (const auto& u : dataset.users) s.lurkers += u.history.size() < 50;
  for (const auto& r : dataset.responses) {
    ++s.polarity_counts[static_cast<std::size_t>(r.polarity)];
    ++s.intensity_counts[static_cast<std::size_t>(r.intensity)];
  }
  s.distant_shared_belief_ratio = distant_shared_belief_ratio(build_graph(dataset, gold_personas));
  return s;
}

void write_world(const World& world, const std::filesystem::path& dir) {
  write_dataset(world.dataset, dir);
  write_personas(dir / "gold_personas.jsonl", world.gold_personas);
}

}  // namespace beliefcast
