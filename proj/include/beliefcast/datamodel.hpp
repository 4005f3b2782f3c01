#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace beliefcast {

/// Raised for malformed input files and broken references between records.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UserRecord {
  std::string id;
  std::string profile;
  std::vector<std::string> history;
  std::int64_t follower_count = 0;

  bool operator==(const UserRecord&) const = default;
};

struct NewsItem {
  std::string id;
  std::string headline;

  bool operator==(const NewsItem&) const = default;
};

enum class Polarity : std::uint8_t { Negative = 0, Neutral = 1, Positive = 2 };
inline constexpr int kPolarityClasses = 3;
inline constexpr int kIntensityClasses = 4;

enum class Split : std::uint8_t { Train, Dev, Test };

struct ResponseRecord {
  std::string user_id;
  std::string news_id;
  Polarity polarity = Polarity::Neutral;
  int intensity = 0;  // 0..3
  Split split = Split::Train;

  bool operator==(const ResponseRecord&) const = default;
};

/// A directed follow relation: `src` follows `dst`.
struct FollowEdge {
  std::string src;
  std::string dst;

  bool operator==(const FollowEdge&) const = default;
  auto operator<=>(const FollowEdge&) const = default;
};

std::string_view to_string(Polarity p);
std::string_view to_string(Split s);
Polarity parse_polarity(std::string_view text);
Split parse_split(std::string_view text);

/// Signed scalar used for correlation metrics. Neutral always maps to 0.
int signed_intensity(Polarity polarity, int intensity);

struct Dataset {
  std::vector<UserRecord> users;
  std::vector<NewsItem> news;
  std::vector<ResponseRecord> responses;
  std::vector<FollowEdge> follows;

  const UserRecord* find_user(std::string_view id) const;
  const NewsItem* find_news(std::string_view id) const;
  std::vector<ResponseRecord> split(Split s) const;

  /// Rebuilds the id lookup maps. Called by loaders; call again after
  /// mutating `users` or `news` by hand.
  void reindex();

  bool operator==(const Dataset& other) const {
    return users == other.users && news == other.news && responses == other.responses &&
           follows == other.follows;
  }

 private:
  std::map<std::string, std::size_t, std::less<>> user_index_;
  std::map<std::string, std::size_t, std::less<>> news_index_;
};

/// Checks id uniqueness, headline non-emptiness, label ranges and that every
/// response and follow edge references known records. Throws DataError.
void validate(const Dataset& dataset);

// Line-oriented readers. `source` names the origin in error messages.
std::vector<UserRecord> read_users(std::istream& in, std::string_view source = "users.jsonl");
std::vector<NewsItem> read_news(std::istream& in, std::string_view source = "news.jsonl");
std::vector<ResponseRecord> read_responses(std::istream& in,
                                           std::string_view source = "responses.jsonl");
std::vector<FollowEdge> read_follows(std::istream& in, std::string_view source = "follows.tsv");

void write_users(std::ostream& out, const std::vector<UserRecord>& users);
void write_news(std::ostream& out, const std::vector<NewsItem>& news);
void write_responses(std::ostream& out, const std::vector<ResponseRecord>& responses);
void write_follows(std::ostream& out, const std::vector<FollowEdge>& follows);

Dataset load_dataset(const std::filesystem::path& users_path, const std::filesystem::path& news_path,
                     const std::filesystem::path& responses_path,
                     const std::filesystem::path& follows_path);

/// Loads users.jsonl, news.jsonl, responses.jsonl and follows.tsv from `dir`.
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Test samples whose responder has fewer than `threshold` history posts go
/// to `first`, the rest to `second`.
std::pair<std::vector<ResponseRecord>, std::vector<ResponseRecord>> lurker_split(
    const Dataset& dataset, const std::vector<ResponseRecord>& samples, std::size_t threshold = 50);
std::pair<std::vector<ResponseRecord>, std::vector<ResponseRecord>> lurker_split(
    const Dataset& dataset, std::size_t threshold = 50);

/// Samples from `eval` whose user never responds in `train`.
std::vector<ResponseRecord> unseen_user_split(const std::vector<ResponseRecord>& train,
                                              const std::vector<ResponseRecord>& eval);

std::string trim(std::string_view text);

}  // namespace beliefcast
