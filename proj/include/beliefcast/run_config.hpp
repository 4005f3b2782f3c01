#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "beliefcast/graph.hpp"
#include "beliefcast/hgt.hpp"
#include "beliefcast/llm.hpp"
#include "beliefcast/synth.hpp"
#include "beliefcast/train.hpp"

namespace beliefcast {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Empty paths default to files inside `data` (or `out` for run outputs).
struct PathsConfig {
  std::string data = "data";
  std::string out = "runs";
  std::string personas;
  std::string graph;
  std::string embeddings;
  std::string checkpoint;
  std::string intensity_checkpoint;  // optional second model for the intensity head
  std::string cache;                 // persona cache (JSONL); optional
  std::string replay;                // recorded LLM replies (JSONL); optional
  std::string embedding_file;        // vectors for embed.provider = file

  std::filesystem::path personas_path() const;
  std::filesystem::path graph_path() const;
  std::filesystem::path embeddings_path() const;
  std::filesystem::path checkpoint_path() const;
};

struct ClientSection {
  ClientConfig remote;
  bool mock = false;
  unsigned threads = 1;
};

struct EvalSection {
  Split split = Split::Test;
  bool lurkers = false;
  bool unseen = false;
  bool by_belief = false;
  std::size_t lurker_threshold = 50;
};

struct RunConfig {
  std::uint64_t seed = 42;
  PathsConfig paths;
  SynthConfig synth;
  hgt::HgtConfig hgt;
  hgt::TrainConfig train;
  ClientSection client;
  AblationOptions ablation;
  std::string embed_provider = "hash";  // hash | random | file
  std::size_t influencers = 0;          // 0: every dataset user is a node
  std::size_t history_cap = 50;
  EvalSection eval;
  std::string zeroshot_mode = "social";
  std::size_t zeroshot_k = 25;

  void validate() const;
};

struct ConfigKey {
  std::string name;  // "section.key", or "seed"
  std::string help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every recognized key in a fixed order.
const std::vector<ConfigKey>& config_keys();

/// Throws ConfigError for unknown keys and unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Parses a flat TOML-style file: "[section]" headers, "key = value" lines,
/// '#' comments, optional double quotes around values. Returns fully
/// qualified keys in file order.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                   std::string_view source = "config");

void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Every key with its current value, in the file syntax.
std::string dump_config(const RunConfig& config);

}  // namespace beliefcast
