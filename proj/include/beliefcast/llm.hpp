#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace beliefcast {

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
};

/// Fixed system message sent with every request.
inline constexpr std::string_view kSystemPreamble =
    "You are a careful social media analyst. Follow the output format exactly.";

/// Builds a request holding the system preamble followed by one user turn.
ChatRequest make_request(std::string user_prompt);

/// Stable FNV-1a hash over roles and contents, as 16 hex digits.
std::string fingerprint(const ChatRequest& request);

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, std::string raw = {})
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Chat-completion backend. Implementations must be safe to call from several
/// threads at once.
class LlmClient {
 public:
  virtual ~LlmClient() = default;

  std::string complete(const ChatRequest& request) {
    ++calls_;
    return do_complete(request);
  }

  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::string do_complete(const ChatRequest& request) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

struct ClientConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_retries = 3;
  double requests_per_second = 1.0;  // <= 0 disables the cap
  std::string token_env = "OPENAI_API_KEY";
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::chrono::seconds timeout{60};
};

/// OpenAI-compatible chat-completions request body.
std::string encode_chat_request(const ChatRequest& request, const ClientConfig& config);
/// Content of the first choice's message. Throws TransportError when absent.
std::string decode_chat_response(std::string_view body);

/// Talks to an OpenAI-compatible `/chat/completions` endpoint. Transient
/// failures (connection errors, 429, 5xx) are retried with exponential
/// backoff; requests are spaced to honor `requests_per_second`.
class RemoteClient : public LlmClient {
 public:
  explicit RemoteClient(ClientConfig config);

 protected:
  std::string do_complete(const ChatRequest& request) override;

 private:
  void throttle();

  ClientConfig config_;
  std::string token_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Deterministic offline stand-in. Replies are a pure function of the request
/// and the seed. The persona task reads belief keywords from the user text; the
/// prediction task scores headline stance tokens against the beliefs visible in
/// the prompt. With `fixed_reply` every request gets that text.
class MockClient : public LlmClient {
 public:
  explicit MockClient(std::uint64_t seed = 0, std::optional<std::string> fixed_reply = {})
      : seed_(seed), fixed_reply_(std::move(fixed_reply)) {}

 protected:
  std::string do_complete(const ChatRequest& request) override;

 private:
  std::uint64_t seed_;
  std::optional<std::string> fixed_reply_;
};

/// Serves recorded replies by request fingerprint and records misses from an
/// optional upstream client. Without upstream a miss is a TransportError.
class ReplayClient : public LlmClient {
 public:
  explicit ReplayClient(std::shared_ptr<LlmClient> upstream = nullptr)
      : upstream_(std::move(upstream)) {}

  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::size_t size() const;

 protected:
  std::string do_complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<LlmClient> upstream_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> replies_;
};

}  // namespace beliefcast
