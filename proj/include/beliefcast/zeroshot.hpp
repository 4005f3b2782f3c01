#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "beliefcast/datamodel.hpp"
#include "beliefcast/graph.hpp"
#include "beliefcast/llm.hpp"
#include "beliefcast/metrics.hpp"
#include "beliefcast/persona.hpp"

namespace beliefcast {

enum class ZeroShotMode : std::uint8_t { Baseline, Latent, Social };

std::string_view to_string(ZeroShotMode m);
ZeroShotMode parse_zero_shot_mode(std::string_view text);

inline constexpr std::size_t kDefaultNeighbors = 25;
inline constexpr std::string_view kNoSocialContext = "No social context is available for this user.";

struct SocialContext {
  std::string user_id;
  std::string summary;
  std::vector<std::string> contributors;  // rank order

  bool operator==(const SocialContext&) const = default;
};

struct ZeroShotPrediction {
  Polarity polarity = Polarity::Neutral;
  int intensity = 0;
  std::string raw;
};

/// Follow neighbors of `user_id` in either direction, ranked by
/// follower_count descending with ties broken by ascending id, cut to `k`.
/// Throws DataError when the user is not a graph node or lacks a record.
std::vector<std::string> filter_neighbors(const HeteroGraph& graph, const Dataset& dataset,
                                          std::string_view user_id, std::size_t k);

/// Prompt listing the neighbors' serialized personas in rank order.
std::string render_social_prompt(const std::vector<LatentPersona>& neighbor_personas);

/// One LLM call summarizing the neighbors; none when the list is empty.
SocialContext aggregate_social_context(LlmClient& client, std::string_view user_id,
                                       const std::vector<std::string>& neighbor_ids,
                                       const std::vector<LatentPersona>& neighbor_personas);

std::string render_prediction_prompt(const NewsItem& news, const UserRecord& user, ZeroShotMode mode,
                                     const LatentPersona* latent, const SocialContext* social,
                                     std::size_t history_cap = kDefaultHistoryCap);

/// Accepts "polarity=<p>; intensity=<n>" and looser spellings: any order,
/// any case, ':' or '=' as separator. Throws ParseError when either field is
/// missing or out of range.
ZeroShotPrediction parse_prediction(std::string_view text);
std::string serialize_prediction(const ZeroShotPrediction& p);

struct ZeroShotOptions {
  std::size_t k = kDefaultNeighbors;
  int max_retries = 2;
  std::size_t history_cap = kDefaultHistoryCap;
  unsigned threads = 1;
};

/// Renders the mode's prompt, queries, parses; retries with a repair
/// instruction on parse failure.
ZeroShotPrediction predict_zero_shot(LlmClient& client, const NewsItem& news, const UserRecord& user,
                                     ZeroShotMode mode, const LatentPersona* latent, const SocialContext* social,
                                     const ZeroShotOptions& options = {});

struct PredictionRecord {
  std::string user_id;
  std::string news_id;
  ZeroShotMode mode = ZeroShotMode::Baseline;
  ZeroShotPrediction prediction;
};

struct ZeroShotRun {
  EvalReport report;  // over the samples that produced a prediction
  std::vector<PredictionRecord> predictions;  // test-sample order
  std::vector<std::string> errors;            // one line per failed sample
};

/// Runs the pipeline for every test response. Personas are taken from
/// `known_personas` by user id when present and extracted otherwise (through
/// `cache`). Failures are counted and the run continues.
ZeroShotRun run_zero_shot_eval(const HeteroGraph& graph, const Dataset& dataset, LlmClient& client,
                               ZeroShotMode mode, const ZeroShotOptions& options = {},
                               const std::vector<LatentPersona>* known_personas = nullptr,
                               PersonaCache* cache = nullptr);

/// zeroshot_predictions.jsonl, one record per line with sorted keys.
void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records);

}  // namespace beliefcast
