#include "beliefcast/persona.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "beliefcast/prompts.hpp"
#include "beliefcast/random.hpp"
#include "json.hpp"

namespace beliefcast {

using nlohmann::json;

std::string_view to_string(Stance s) {
  switch (s) {
    case Stance::Favor: return "favor";
    case Stance::Against: return "against";
    case Stance::Neutral: return "neutral";
  }
  return "neutral";
}

namespace {

std::optional<Stance> parse_stance(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  s = trim(s);
  if (s == "favor" || s == "favour" || s == "for" || s == "support") return Stance::Favor;
  if (s == "against" || s == "oppose") return Stance::Against;
  if (s == "neutral") return Stance::Neutral;
  return std::nullopt;
}

json to_json_object(const LatentPersona& p) {
  auto names = [](const std::vector<Belief>& bs) {
    std::vector<std::string> out;
    for (Belief b : bs) out.emplace_back(to_string(b));
    return out;
  };
  json views = json::array();
  for (const auto& v : p.views) views.push_back({{"target", v.target}, {"stance", to_string(v.stance)}});
  json obj = {{"user_id", p.user_id},
              {"moral_values", names(p.moral_values)},
              {"human_values", names(p.human_values)},
              {"views", views},
              {"interests", p.interests},
              {"summary", p.summary}};
  obj["profession"] = p.profession ? json(*p.profession) : json(nullptr);
  return obj;
}

// Finds the first balanced {...} span in `text` that parses as a JSON object.
std::optional<json> first_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        auto parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

// Strings from a list field, splitting comma-separated entries. A bare string
// is treated as a one-element list.
std::vector<std::string> string_items(const json& value) {
  std::vector<std::string> raw;
  if (value.is_string()) raw.push_back(value.get<std::string>());
  else if (value.is_array())
    for (const auto& v : value)
      if (v.is_string()) raw.push_back(v.get<std::string>());
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (auto t = trim(part); !t.empty()) out.push_back(std::move(t));
  }
  return out;
}

void add_unique(std::vector<Belief>& list, Belief b) {
  if (std::find(list.begin(), list.end(), b) == list.end()) list.push_back(b);
}

}  // namespace

std::vector<Belief> LatentPersona::beliefs() const {
  std::vector<Belief> out = moral_values;
  out.insert(out.end(), human_values.begin(), human_values.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string serialize(const LatentPersona& persona) { return to_json_object(persona).dump(); }

LatentPersona parse_persona_response(std::string_view text, std::vector<std::string>* warnings) {
  const auto obj = first_object(text);
  if (!obj) throw ParseError("no JSON object found in model reply", std::string(text));

  LatentPersona p;
  if (auto it = obj->find("user_id"); it != obj->end() && it->is_string()) p.user_id = it->get<std::string>();

  for (const char* key : {"moral_values", "human_values"}) {
    auto it = obj->find(key);
    if (it == obj->end()) continue;
    for (const auto& token : string_items(*it)) {
      auto b = parse_belief(token);
      if (!b) {
        if (warnings) warnings->push_back("dropped out-of-vocabulary belief \"" + token + "\"");
        continue;
      }
      add_unique(family(*b) == BeliefFamily::MoralValue ? p.moral_values : p.human_values, *b);
    }
  }

  if (auto it = obj->find("views"); it != obj->end() && it->is_array()) {
    for (const auto& v : *it) {
      if (!v.is_object()) continue;
      auto target = v.find("target");
      if (target == v.end() || !target->is_string()) continue;
      View view{trim(target->get<std::string>()), Stance::Neutral};
      if (auto st = v.find("stance"); st != v.end() && st->is_string()) {
        if (auto s = parse_stance(st->get<std::string>())) view.stance = *s;
        else if (warnings) warnings->push_back("unknown stance for \"" + view.target + "\"");
      }
      if (!view.target.empty() &&
          std::none_of(p.views.begin(), p.views.end(), [&](const View& x) { return x == view; }))
        p.views.push_back(std::move(view));
    }
  }
  if (auto it = obj->find("profession"); it != obj->end() && it->is_string()) p.profession = it->get<std::string>();
  if (auto it = obj->find("interests"); it != obj->end()) {
    for (auto& s : string_items(*it))
      if (std::find(p.interests.begin(), p.interests.end(), s) == p.interests.end())
        p.interests.push_back(std::move(s));
  }
  if (auto it = obj->find("summary"); it != obj->end() && it->is_string()) p.summary = it->get<std::string>();
  return p;
}

std::string render_persona_prompt(std::string_view profile, const std::vector<std::string>& history,
                                  std::size_t history_cap) {
  std::ostringstream out;
  out << prompts::kTaskPrefix << prompts::kPersonaTask << "\n"
      << "Infer the latent persona of the social media user described below. Consider the "
         "moral values and human values the user holds, their views on entities and issues, "
         "their profession and their interests.\n";
  out << "\n## " << prompts::kProfileSection << "\n";
  const std::string p = trim(profile);
  out << (p.empty() ? std::string(prompts::kNoProfile) : p) << "\n";

  out << "\n## " << prompts::kPostsSection << "\n";
  const std::size_t take = std::min(history_cap, history.size());
  if (take == 0) out << prompts::kNoPosts << "\n";
  for (std::size_t i = history.size() - take; i < history.size(); ++i) out << "- " << history[i] << "\n";

  out << "\n## " << prompts::kFormatSection << "\n"
      << "Reply with exactly one JSON object and nothing else. Keys:\n"
      << "  \"moral_values\": list chosen from [";
  bool first_moral = true, first_human = true;
  std::string human;
  for (Belief b : all_beliefs()) {
    if (family(b) == BeliefFamily::MoralValue) {
      out << (first_moral ? "" : ", ") << to_string(b);
      first_moral = false;
    } else {
      human += (first_human ? "" : ", ") + std::string(to_string(b));
      first_human = false;
    }
  }
  out << "]\n"
      << "  \"human_values\": list chosen from [" << human << "]\n"
      << "  \"views\": list of {\"target\": entity or issue, \"stance\": favor|against|neutral}\n"
      << "  \"profession\": string or null\n"
      << "  \"interests\": list of strings\n"
      << "  \"summary\": one or two sentences describing the user\n"
      << "If there is too little information, return empty lists and say so in the summary.\n";
  return out.str();
}

std::string prompt_fingerprint(std::string_view prompt) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
  return hex;
}

std::optional<LatentPersona> PersonaCache::lookup(const std::string& user_id,
                                                  const std::string& fingerprint) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(user_id);
  if (it == entries_.end() || it->second.fingerprint != fingerprint) return std::nullopt;
  return it->second.persona;
}

void PersonaCache::store(const std::string& user_id, CacheEntry entry) {
  std::lock_guard lock(mutex_);
  entries_[user_id] = std::move(entry);
}

std::size_t PersonaCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void PersonaCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::lock_guard lock(mutex_);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json rec = json::parse(line);
    CacheEntry e{rec.at("fingerprint").get<std::string>(), rec.at("raw").get<std::string>(),
                 parse_persona_response(rec.at("persona").dump())};
    entries_[rec.at("user_id").get<std::string>()] = std::move(e);
  }
}

void PersonaCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  std::lock_guard lock(mutex_);
  for (const auto& [user, e] : entries_)
    out << json{{"user_id", user},
                {"fingerprint", e.fingerprint},
                {"raw", e.raw},
                {"persona", to_json_object(e.persona)}}
               .dump()
        << '\n';
}

LatentPersona extract_latent_persona(LlmClient& client, const UserRecord& user,
                                     const PersonaOptions& options, PersonaCache* cache,
                                     std::vector<std::string>* warnings) {
  const std::string prompt = render_persona_prompt(user.profile, user.history, options.history_cap);
  const std::string fp = prompt_fingerprint(prompt);
  if (cache)
    if (auto hit = cache->lookup(user.id, fp)) return *hit;

  ChatRequest request = make_request(prompt);
  std::string raw;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    raw = client.complete(request);
    try {
      LatentPersona p = parse_persona_response(raw, warnings);
      p.user_id = user.id;
      if (cache) cache->store(user.id, CacheEntry{fp, raw, p});
      return p;
    } catch (const ParseError&) {
      request.messages.push_back({"assistant", raw});
      request.messages.push_back({"user", std::string(kRepairInstruction)});
    }
  }
  throw ParseError("unparseable persona for user \"" + user.id + "\" after " +
                       std::to_string(options.max_retries) + " retries",
                   raw);
}

std::vector<LatentPersona> extract_all(LlmClient& client, const std::vector<UserRecord>& users,
                                       const PersonaOptions& options, PersonaCache* cache,
                                       unsigned threads) {
  std::vector<LatentPersona> out(users.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < users.size(); i = next++) {
      try {
        out[i] = extract_latent_persona(client, users[i], options, cache);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = users.size();
      }
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void write_personas(std::ostream& out, const std::vector<LatentPersona>& personas) {
  for (const auto& p : personas) out << serialize(p) << '\n';
}

std::vector<LatentPersona> read_personas(std::istream& in, std::string_view source) {
  std::vector<LatentPersona> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      throw DataError(std::string(source) + ":" + std::to_string(n) + ": invalid JSON object");
    for (const char* key : {"moral_values", "human_values"}) {
      if (!obj.contains(key)) continue;
      for (const auto& token : string_items(obj.at(key))) {
        auto b = parse_belief(token);
        if (!b || to_string(*b) != token)
          throw DataError(std::string(source) + ":" + std::to_string(n) + ": unknown belief symbol \"" +
                          token + "\"");
      }
    }
    out.push_back(parse_persona_response(line));
    if (out.back().user_id.empty())
      throw DataError(std::string(source) + ":" + std::to_string(n) + ": missing user_id");
  }
  return out;
}

void write_personas(const std::filesystem::path& path, const std::vector<LatentPersona>& personas) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_personas(out, personas);
}

std::vector<LatentPersona> read_personas(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_personas(in, path.filename().string());
}

}  // namespace beliefcast
