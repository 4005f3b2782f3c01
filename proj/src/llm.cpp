#include "beliefcast/llm.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include "beliefcast/embed.hpp"
#include "beliefcast/persona.hpp"
#include "beliefcast/prompts.hpp"
#include "beliefcast/random.hpp"
#include "httplib.h"
#include "json.hpp"

namespace beliefcast {

using nlohmann::json;

namespace prompts {

std::string_view task_of(std::string_view prompt) {
  if (prompt.rfind(kTaskPrefix, 0) != 0) return {};
  prompt.remove_prefix(kTaskPrefix.size());
  return prompt.substr(0, prompt.find('\n'));
}

std::string_view section(std::string_view prompt, std::string_view name) {
  const std::string header = "\n## " + std::string(name) + "\n";
  const auto start = prompt.find(header);
  if (start == std::string_view::npos) return {};
  auto body = prompt.substr(start + header.size());
  const auto end = body.find("\n## ");
  return end == std::string_view::npos ? body : body.substr(0, end);
}

}  // namespace prompts

ChatRequest make_request(std::string user_prompt) {
  return ChatRequest{{{"system", std::string(kSystemPreamble)}, {"user", std::move(user_prompt)}}};
}

std::string fingerprint(const ChatRequest& request) {
  std::string buf;
  for (const auto& m : request.messages) {
    buf += m.role;
    buf.push_back('\0');
    buf += m.content;
    buf.push_back('\0');
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(buf)));
  return hex;
}

std::string encode_chat_request(const ChatRequest& request, const ClientConfig& config) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", config.model}, {"temperature", config.temperature}, {"messages", messages}}.dump();
}

std::string decode_chat_response(std::string_view body) {
  try {
    const json doc = json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what(),
                         std::string(body));
  }
}

// ---------------------------------------------------------------------------
// RemoteClient

RemoteClient::RemoteClient(ClientConfig config) : config_(std::move(config)) {
  if (const char* token = std::getenv(config_.token_env.c_str())) token_ = token;
  const auto scheme_end = config_.base_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = config_.base_url.find('/', host_start);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

void RemoteClient::throttle() {
  if (config_.requests_per_second <= 0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config_.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mutex_);
    slot = std::max(next_slot_, std::chrono::steady_clock::now());
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string RemoteClient::do_complete(const ChatRequest& request) {
  httplib::Client http(scheme_host_port_);
  http.set_connection_timeout(config_.timeout);
  http.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  const std::string body = encode_chat_request(request, config_);
  const std::string path = path_prefix_ + "/chat/completions";

  auto delay = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * config_.backoff_factor));
    }
    throttle();
    auto res = http.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return decode_chat_response(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) throw TransportError(last_error, res->body);
  }
  throw TransportError(last_error + " after " + std::to_string(config_.max_retries) + " retries");
}

// ---------------------------------------------------------------------------
// MockClient

namespace {

std::vector<Belief> beliefs_in(std::string_view text) {
  std::map<Belief, int> counts;
  for (const auto& tok : tokenize(text))
    if (auto b = parse_belief(tok)) ++counts[*b];
  std::vector<std::pair<Belief, int>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Belief> out;
  for (const auto& [b, _] : ranked) out.push_back(b);
  return out;
}

std::string mock_persona(std::string_view prompt, std::uint64_t seed) {
  const std::string_view profile = prompts::section(prompt, prompts::kProfileSection);
  const std::string_view posts = prompts::section(prompt, prompts::kPostsSection);
  std::string text;
  if (profile.find(prompts::kNoProfile) == std::string_view::npos) text += profile;
  text += '\n';
  if (posts.find(prompts::kNoPosts) == std::string_view::npos) text += posts;

  LatentPersona p;
  auto found = beliefs_in(text);
  if (found.size() > 5) found.resize(5);
  if (found.empty() && !tokenize(text).empty()) {
    const std::uint64_t h = mix_seed(seed, fnv1a64(text));
    found = {static_cast<Belief>(h % 10), static_cast<Belief>(10 + (h >> 8) % 10)};
  }
  for (Belief b : found)
    (family(b) == BeliefFamily::MoralValue ? p.moral_values : p.human_values).push_back(b);
  std::sort(p.moral_values.begin(), p.moral_values.end());
  std::sort(p.human_values.begin(), p.human_values.end());
  p.summary = found.empty() ? "Too little information to characterize this user."
                            : "Holds values such as " + std::string(to_string(found.front())) + ".";
  return serialize(p);
}

std::string mock_social(std::string_view prompt) {
  std::map<Belief, int> counts;
  const std::string_view body = prompts::section(prompt, prompts::kNeighborsSection);
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    const auto line = body.substr(pos, end - pos);
    pos = end + 1;
    if (line.find('{') == std::string_view::npos) continue;
    try {
      for (Belief b : parse_persona_response(line).beliefs()) ++counts[b];
    } catch (const ParseError&) {
    }
  }
  if (counts.empty()) return "The user's influential neighbors express no clear values.";
  std::vector<std::pair<Belief, int>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string out = "The user's influential neighbors value";
  for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) {
    out += i == 0 ? " " : ", ";
    out += std::string(to_string(ranked[i].first)) + " (" + std::to_string(ranked[i].second) + ")";
  }
  return out + ".";
}

std::string mock_prediction(std::string_view prompt) {
  std::map<Belief, double> weight;
  auto raise = [&](Belief b, double w) { weight[b] = std::max(weight[b], w); };
  for (Belief b : beliefs_in(prompts::section(prompt, prompts::kProfileSection))) raise(b, 1.0);
  for (Belief b : beliefs_in(prompts::section(prompt, prompts::kPostsSection))) raise(b, 1.0);
  if (auto persona = prompts::section(prompt, prompts::kPersonaSection); !persona.empty()) {
    try {
      for (Belief b : parse_persona_response(persona).beliefs()) raise(b, 1.0);
    } catch (const ParseError&) {
    }
  }
  for (Belief b : beliefs_in(prompts::section(prompt, prompts::kSocialSection))) raise(b, 0.5);

  double score = 0.0;
  for (const auto& tok : tokenize(prompts::section(prompt, prompts::kHeadlineSection)))
    if (auto st = parse_stance_token(tok))
      if (auto it = weight.find(st->first); it != weight.end()) score += it->second * st->second;

  constexpr double kThreshold = 0.5;
  const char* polarity = score > kThreshold ? "positive" : score < -kThreshold ? "negative" : "neutral";
  const int intensity = std::min(3, static_cast<int>(std::abs(score)));
  return std::string("polarity=") + polarity + "; intensity=" +
         std::to_string(std::string_view(polarity) == "neutral" ? 0 : intensity);
}

}  // namespace

std::string MockClient::do_complete(const ChatRequest& request) {
  if (fixed_reply_) return *fixed_reply_;
  std::string_view prompt;
  for (const auto& m : request.messages)
    if (m.role == "user") {
      prompt = m.content;
      break;
    }
  const auto task = prompts::task_of(prompt);
  if (task == prompts::kPersonaTask) return mock_persona(prompt, seed_);
  if (task == prompts::kSocialTask) return mock_social(prompt);
  if (task == prompts::kPredictionTask) return mock_prediction(prompt);
  return "I can only help with the tasks I was configured for.";
}

// ---------------------------------------------------------------------------
// ReplayClient

void ReplayClient::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::lock_guard lock(mutex_);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    replies_[rec.at("fingerprint").get<std::string>()] = rec.at("reply").get<std::string>();
  }
}

void ReplayClient::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TransportError("cannot write replay cache " + path.string());
  std::lock_guard lock(mutex_);
  for (const auto& [fp, reply] : replies_)
    out << json{{"fingerprint", fp}, {"reply", reply}}.dump() << '\n';
}

std::size_t ReplayClient::size() const {
  std::lock_guard lock(mutex_);
  return replies_.size();
}

std::string ReplayClient::do_complete(const ChatRequest& request) {
  const std::string key = fingerprint(request);
  {
    std::lock_guard lock(mutex_);
    if (auto it = replies_.find(key); it != replies_.end()) return it->second;
  }
  if (!upstream_) throw TransportError("no recorded reply for request " + key);
  std::string reply = upstream_->complete(request);
  std::lock_guard lock(mutex_);
  replies_.emplace(key, reply);
  return reply;
}

}  // namespace beliefcast
