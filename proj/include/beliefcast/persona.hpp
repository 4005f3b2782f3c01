#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "beliefcast/beliefs.hpp"
#include "beliefcast/datamodel.hpp"
#include "beliefcast/llm.hpp"

namespace beliefcast {

enum class Stance : std::uint8_t { Favor, Against, Neutral };

struct View {
  std::string target;
  Stance stance = Stance::Neutral;

  bool operator==(const View&) const = default;
};

/// Structured beliefs, values and views inferred for one user.
struct LatentPersona {
  std::string user_id;
  std::vector<Belief> moral_values;  // moral-foundation poles only
  std::vector<Belief> human_values;  // basic human values only
  std::vector<View> views;
  std::optional<std::string> profession;
  std::vector<std::string> interests;
  std::string summary;

  std::vector<Belief> beliefs() const;
  bool operator==(const LatentPersona&) const = default;
};

/// Raised when a model reply cannot be turned into the expected structure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

std::string_view to_string(Stance s);

/// Canonical single-line JSON form. Keys are emitted in sorted order.
std::string serialize(const LatentPersona& persona);

/// Lenient parser for model output: extracts the first JSON object found in
/// `text`, ignores unknown keys, normalizes belief tokens and drops tokens
/// outside the vocabulary. Belief tokens listed under the wrong family are
/// moved to the family they belong to. Dropped tokens are appended to
/// `warnings` when given. Throws ParseError when no object can be found.
LatentPersona parse_persona_response(std::string_view text,
                                     std::vector<std::string>* warnings = nullptr);

inline constexpr std::size_t kDefaultHistoryCap = 50;

/// Prompt asking the model for a persona in the strict output schema.
std::string render_persona_prompt(std::string_view profile, const std::vector<std::string>& history,
                                  std::size_t history_cap = kDefaultHistoryCap);

/// 16 hex digit FNV-1a fingerprint of a rendered prompt.
std::string prompt_fingerprint(std::string_view prompt);

struct CacheEntry {
  std::string fingerprint;
  std::string raw;
  LatentPersona persona;
};

/// user id -> most recent extraction. Lookups with a different fingerprint
/// miss. Safe for concurrent use.
class PersonaCache {
 public:
  std::optional<LatentPersona> lookup(const std::string& user_id,
                                      const std::string& fingerprint) const;
  void store(const std::string& user_id, CacheEntry entry);
  std::size_t size() const;

  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, CacheEntry> entries_;
};

struct PersonaOptions {
  std::size_t history_cap = kDefaultHistoryCap;
  int max_retries = 2;
};

inline constexpr std::string_view kRepairInstruction =
    "Your previous answer could not be parsed. Reply again with exactly one JSON object "
    "using only the keys listed above and no surrounding prose.";

/// Renders the persona prompt, queries `client`, and parses the reply,
/// retrying with a repair instruction when parsing fails. Transport errors are
/// retried by the client itself.
LatentPersona extract_latent_persona(LlmClient& client, const UserRecord& user,
                                     const PersonaOptions& options = {},
                                     PersonaCache* cache = nullptr,
                                     std::vector<std::string>* warnings = nullptr);

/// Runs extraction for every user on `threads` workers. Output order follows
/// `users`.
std::vector<LatentPersona> extract_all(LlmClient& client, const std::vector<UserRecord>& users,
                                       const PersonaOptions& options, PersonaCache* cache,
                                       unsigned threads = 1);

/// personas.jsonl. The reader is strict: unknown belief symbols are errors.
void write_personas(std::ostream& out, const std::vector<LatentPersona>& personas);
std::vector<LatentPersona> read_personas(std::istream& in,
                                         std::string_view source = "personas.jsonl");
void write_personas(const std::filesystem::path& path, const std::vector<LatentPersona>& personas);
std::vector<LatentPersona> read_personas(const std::filesystem::path& path);

}  // namespace beliefcast
