#include "beliefcast/datamodel.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace beliefcast {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw DataError(msg.str());
}

// Calls `fn(line_text, line_number)` for every non-blank line.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    fn(line, number);
  }
}

json parse_object(const std::string& line, std::string_view source, std::size_t number) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    fail_at(source, number, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) fail_at(source, number, "expected a JSON object");
  return obj;
}

template <typename T>
T require(const json& obj, const char* key, std::string_view source, std::size_t number) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_at(source, number, std::string("missing field \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail_at(source, number, std::string("field \"") + key + "\" has the wrong type");
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string trim(std::string_view text) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(ws);
  return std::string(text.substr(first, last - first + 1));
}

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::Negative: return "negative";
    case Polarity::Neutral: return "neutral";
    case Polarity::Positive: return "positive";
  }
  return "neutral";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Polarity parse_polarity(std::string_view text) {
  if (text == "negative") return Polarity::Negative;
  if (text == "neutral") return Polarity::Neutral;
  if (text == "positive") return Polarity::Positive;
  throw DataError("unknown polarity \"" + std::string(text) + "\"");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "dev") return Split::Dev;
  if (text == "test") return Split::Test;
  throw DataError("unknown split \"" + std::string(text) + "\"");
}

int signed_intensity(Polarity polarity, int intensity) {
  switch (polarity) {
    case Polarity::Positive: return intensity;
    case Polarity::Negative: return -intensity;
    case Polarity::Neutral: return 0;
  }
  return 0;
}

const UserRecord* Dataset::find_user(std::string_view id) const {
  auto it = user_index_.find(id);
  return it == user_index_.end() ? nullptr : &users[it->second];
}

const NewsItem* Dataset::find_news(std::string_view id) const {
  auto it = news_index_.find(id);
  return it == news_index_.end() ? nullptr : &news[it->second];
}

std::vector<ResponseRecord> Dataset::split(Split s) const {
  std::vector<ResponseRecord> out;
  for (const auto& r : responses)
    if (r.split == s) out.push_back(r);
  return out;
}

void Dataset::reindex() {
  user_index_.clear();
  news_index_.clear();
  for (std::size_t i = 0; i < users.size(); ++i) user_index_.emplace(users[i].id, i);
  for (std::size_t i = 0; i < news.size(); ++i) news_index_.emplace(news[i].id, i);
}

void validate(const Dataset& dataset) {
  std::set<std::string_view> user_ids;
  for (std::size_t i = 0; i < dataset.users.size(); ++i) {
    const auto& u = dataset.users[i];
    if (u.id.empty()) fail_at("users", i + 1, "empty user id");
    if (!user_ids.insert(u.id).second) fail_at("users", i + 1, "duplicate user id \"" + u.id + "\"");
    if (u.follower_count < 0) fail_at("users", i + 1, "negative follower_count for \"" + u.id + "\"");
  }
  std::set<std::string_view> news_ids;
  for (std::size_t i = 0; i < dataset.news.size(); ++i) {
    const auto& n = dataset.news[i];
    if (n.id.empty()) fail_at("news", i + 1, "empty news id");
    if (!news_ids.insert(n.id).second) fail_at("news", i + 1, "duplicate news id \"" + n.id + "\"");
    if (trim(n.headline).empty()) fail_at("news", i + 1, "empty headline for \"" + n.id + "\"");
  }
  for (std::size_t i = 0; i < dataset.responses.size(); ++i) {
    const auto& r = dataset.responses[i];
    if (!user_ids.count(r.user_id)) fail_at("responses", i + 1, "unknown user_id \"" + r.user_id + "\"");
    if (!news_ids.count(r.news_id)) fail_at("responses", i + 1, "unknown news_id \"" + r.news_id + "\"");
    if (r.intensity < 0 || r.intensity > 3)
      fail_at("responses", i + 1, "intensity out of range: " + std::to_string(r.intensity));
  }
  for (std::size_t i = 0; i < dataset.follows.size(); ++i) {
    const auto& f = dataset.follows[i];
    if (!user_ids.count(f.src)) fail_at("follows", i + 1, "unknown user \"" + f.src + "\"");
    if (!user_ids.count(f.dst)) fail_at("follows", i + 1, "unknown user \"" + f.dst + "\"");
  }
}

std::vector<UserRecord> read_users(std::istream& in, std::string_view source) {
  std::vector<UserRecord> users;
  for_each_line(in, [&](const std::string& line, std::size_t n) {
    const json obj = parse_object(line, source, n);
    UserRecord u;
    u.id = require<std::string>(obj, "id", source, n);
    u.profile = trim(obj.value("profile", std::string()));
    if (auto it = obj.find("history"); it != obj.end()) {
      if (!it->is_array()) fail_at(source, n, "field \"history\" must be an array");
      for (const auto& post : *it) {
        if (!post.is_string()) fail_at(source, n, "history entries must be strings");
        u.history.push_back(trim(post.get<std::string>()));
      }
    }
    u.follower_count = obj.value("follower_count", std::int64_t{0});
    if (u.follower_count < 0) fail_at(source, n, "negative follower_count");
    users.push_back(std::move(u));
  });
  return users;
}

std::vector<NewsItem> read_news(std::istream& in, std::string_view source) {
  std::vector<NewsItem> news;
  for_each_line(in, [&](const std::string& line, std::size_t n) {
    const json obj = parse_object(line, source, n);
    NewsItem item{require<std::string>(obj, "id", source, n),
                  trim(require<std::string>(obj, "headline", source, n))};
    if (item.headline.empty()) fail_at(source, n, "empty headline");
    news.push_back(std::move(item));
  });
  return news;
}

std::vector<ResponseRecord> read_responses(std::istream& in, std::string_view source) {
  std::vector<ResponseRecord> responses;
  for_each_line(in, [&](const std::string& line, std::size_t n) {
    const json obj = parse_object(line, source, n);
    ResponseRecord r;
    r.user_id = require<std::string>(obj, "user_id", source, n);
    r.news_id = require<std::string>(obj, "news_id", source, n);
    try {
      r.polarity = parse_polarity(require<std::string>(obj, "polarity", source, n));
      r.split = parse_split(require<std::string>(obj, "split", source, n));
    } catch (const DataError& e) {
      fail_at(source, n, e.what());
    }
    r.intensity = require<int>(obj, "intensity", source, n);
    if (r.intensity < 0 || r.intensity > 3)
      fail_at(source, n, "intensity out of range: " + std::to_string(r.intensity));
    responses.push_back(std::move(r));
  });
  return responses;
}

std::vector<FollowEdge> read_follows(std::istream& in, std::string_view source) {
  std::vector<FollowEdge> follows;
  for_each_line(in, [&](const std::string& line, std::size_t n) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      fail_at(source, n, "expected two tab-separated ids");
    FollowEdge e{trim(line.substr(0, tab)), trim(line.substr(tab + 1))};
    if (e.src.empty() || e.dst.empty()) fail_at(source, n, "empty id");
    follows.push_back(std::move(e));
  });
  return follows;
}

void write_users(std::ostream& out, const std::vector<UserRecord>& users) {
  for (const auto& u : users) {
    json obj = {{"id", u.id},
                {"profile", u.profile},
                {"history", u.history},
                {"follower_count", u.follower_count}};
    out << obj.dump() << '\n';
  }
}

void write_news(std::ostream& out, const std::vector<NewsItem>& news) {
  for (const auto& n : news) out << json{{"id", n.id}, {"headline", n.headline}}.dump() << '\n';
}

void write_responses(std::ostream& out, const std::vector<ResponseRecord>& responses) {
  for (const auto& r : responses) {
    json obj = {{"user_id", r.user_id},
                {"news_id", r.news_id},
                {"polarity", to_string(r.polarity)},
                {"intensity", r.intensity},
                {"split", to_string(r.split)}};
    out << obj.dump() << '\n';
  }
}

void write_follows(std::ostream& out, const std::vector<FollowEdge>& follows) {
  for (const auto& f : follows) out << f.src << '\t' << f.dst << '\n';
}

namespace {

// Re-raises a validation failure with the offending file and line. Validation
// numbers records from 1 in file order, which matches line numbers for files
// without blank lines.
Dataset checked(Dataset ds, const std::filesystem::path& users_path,
                const std::filesystem::path& news_path, const std::filesystem::path& responses_path,
                const std::filesystem::path& follows_path) {
  try {
    validate(ds);
  } catch (const DataError& e) {
    std::string what = e.what();
    auto rename = [&](std::string_view tag, const std::filesystem::path& p) {
      if (what.rfind(tag, 0) == 0 && what.size() > tag.size() && what[tag.size()] == ':')
        what = p.filename().string() + what.substr(tag.size());
    };
    rename("users", users_path);
    rename("news", news_path);
    rename("responses", responses_path);
    rename("follows", follows_path);
    throw DataError(what);
  }
  ds.reindex();
  return ds;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& users_path, const std::filesystem::path& news_path,
                     const std::filesystem::path& responses_path,
                     const std::filesystem::path& follows_path) {
  Dataset ds;
  {
    auto in = open_input(users_path);
    ds.users = read_users(in, users_path.filename().string());
  }
  {
    auto in = open_input(news_path);
    ds.news = read_news(in, news_path.filename().string());
  }
  {
    auto in = open_input(responses_path);
    ds.responses = read_responses(in, responses_path.filename().string());
  }
  {
    auto in = open_input(follows_path);
    ds.follows = read_follows(in, follows_path.filename().string());
  }
  return checked(std::move(ds), users_path, news_path, responses_path, follows_path);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  return load_dataset(dir / "users.jsonl", dir / "news.jsonl", dir / "responses.jsonl",
                      dir / "follows.tsv");
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_output(dir / "users.jsonl");
    write_users(out, dataset.users);
  }
  {
    auto out = open_output(dir / "news.jsonl");
    write_news(out, dataset.news);
  }
  {
    auto out = open_output(dir / "responses.jsonl");
    write_responses(out, dataset.responses);
  }
  {
    auto out = open_output(dir / "follows.tsv");
    write_follows(out, dataset.follows);
  }
}

std::pair<std::vector<ResponseRecord>, std::vector<ResponseRecord>> lurker_split(
    const Dataset& dataset, const std::vector<ResponseRecord>& samples, std::size_t threshold) {
  std::pair<std::vector<ResponseRecord>, std::vector<ResponseRecord>> parts;
  for (const auto& r : samples) {
    const UserRecord* u = dataset.find_user(r.user_id);
    const std::size_t posts = u ? u->history.size() : 0;
    (posts < threshold ? parts.first : parts.second).push_back(r);
  }
  return parts;
}

std::pair<std::vector<ResponseRecord>, std::vector<ResponseRecord>> lurker_split(
    const Dataset& dataset, std::size_t threshold) {
  return lurker_split(dataset, dataset.split(Split::Test), threshold);
}

std::vector<ResponseRecord> unseen_user_split(const std::vector<ResponseRecord>& train,
                                              const std::vector<ResponseRecord>& eval) {
  std::set<std::string_view> seen;
  for (const auto& r : train) seen.insert(r.user_id);
  std::vector<ResponseRecord> out;
  for (const auto& r : eval)
    if (!seen.count(r.user_id)) out.push_back(r);
  return out;
}

}  // namespace beliefcast
