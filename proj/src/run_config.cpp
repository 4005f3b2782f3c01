#include "beliefcast/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "beliefcast/zeroshot.hpp"

namespace beliefcast {

namespace fs = std::filesystem;

fs::path PathsConfig::personas_path() const {
  return personas.empty() ? fs::path(data) / "personas.jsonl" : fs::path(personas);
}
fs::path PathsConfig::graph_path() const { return graph.empty() ? fs::path(data) / "graph.json" : fs::path(graph); }
fs::path PathsConfig::embeddings_path() const {
  return embeddings.empty() ? fs::path(data) / "embeddings.bin" : fs::path(embeddings);
}
fs::path PathsConfig::checkpoint_path() const {
  return checkpoint.empty() ? fs::path(out) / "checkpoint.bin" : fs::path(checkpoint);
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("bad value for " + std::string(key) + ": \"" + std::string(text) + "\"");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean for " + std::string(key) + ": \"" + std::string(text) + "\"");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Get>
ConfigKey string_key(std::string name, std::string help, Get get) {
  return {std::move(name), std::move(help),
          [get](RunConfig& c, std::string_view v) { get(c) = std::string(v); },
          [get](const RunConfig& c) { return get(const_cast<RunConfig&>(c)); }};
}

template <typename T, typename Get>
ConfigKey number_key(std::string name, std::string help, Get get) {
  const std::string key = name;
  return {std::move(name), std::move(help),
          [get, key](RunConfig& c, std::string_view v) { get(c) = parse_number<T>(key, v); },
          [get](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt_double(get(const_cast<RunConfig&>(c)));
            else
              return std::to_string(get(const_cast<RunConfig&>(c)));
          }};
}

template <typename Get>
ConfigKey bool_key(std::string name, std::string help, Get get) {
  const std::string key = name;
  return {std::move(name), std::move(help),
          [get, key](RunConfig& c, std::string_view v) { get(c) = parse_bool(key, v); },
          [get](const RunConfig& c) { return std::string(get(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> k;
  k.push_back(number_key<std::uint64_t>("seed", "seed for training, initialization, embeddings and the mock client",
                                        [](RunConfig& c) -> auto& { return c.seed; }));

  k.push_back(string_key("paths.data", "dataset directory", [](RunConfig& c) -> auto& { return c.paths.data; }));
  k.push_back(string_key("paths.out", "output directory for runs", [](RunConfig& c) -> auto& { return c.paths.out; }));
  k.push_back(string_key("paths.personas", "personas.jsonl (default <data>/personas.jsonl)",
                         [](RunConfig& c) -> auto& { return c.paths.personas; }));
  k.push_back(string_key("paths.graph", "graph.json (default <data>/graph.json)",
                         [](RunConfig& c) -> auto& { return c.paths.graph; }));
  k.push_back(string_key("paths.embeddings", "embeddings.bin (default <data>/embeddings.bin)",
                         [](RunConfig& c) -> auto& { return c.paths.embeddings; }));
  k.push_back(string_key("paths.checkpoint", "model checkpoint (default <out>/checkpoint.bin)",
                         [](RunConfig& c) -> auto& { return c.paths.checkpoint; }));
  k.push_back(string_key("paths.intensity_checkpoint", "separately trained intensity model (optional)",
                         [](RunConfig& c) -> auto& { return c.paths.intensity_checkpoint; }));
  k.push_back(string_key("paths.cache", "persona cache file (optional)",
                         [](RunConfig& c) -> auto& { return c.paths.cache; }));
  k.push_back(string_key("paths.replay", "recorded LLM replies, read and extended (optional)",
                         [](RunConfig& c) -> auto& { return c.paths.replay; }));
  k.push_back(string_key("paths.embedding_file", "precomputed node vectors for embed.provider=file",
                         [](RunConfig& c) -> auto& { return c.paths.embedding_file; }));

  k.push_back(number_key<int>("synth.n_users", "users", [](RunConfig& c) -> auto& { return c.synth.n_users; }));
  k.push_back(number_key<int>("synth.n_communities", "follow communities",
                              [](RunConfig& c) -> auto& { return c.synth.n_communities; }));
  k.push_back(number_key<int>("synth.beliefs_per_user", "beliefs per user",
                              [](RunConfig& c) -> auto& { return c.synth.beliefs_per_user; }));
  k.push_back(number_key<double>("synth.p_follow_intra", "follow probability inside a community",
                                 [](RunConfig& c) -> auto& { return c.synth.p_follow_intra; }));
  k.push_back(number_key<double>("synth.p_follow_inter", "follow probability across communities",
                                 [](RunConfig& c) -> auto& { return c.synth.p_follow_inter; }));
  k.push_back(number_key<int>("synth.n_news", "news items", [](RunConfig& c) -> auto& { return c.synth.n_news; }));
  k.push_back(number_key<int>("synth.responses_per_news", "responders per news item",
                              [](RunConfig& c) -> auto& { return c.synth.responses_per_news; }));
  k.push_back(number_key<double>("synth.lurker_fraction", "share of users without text",
                                 [](RunConfig& c) -> auto& { return c.synth.lurker_fraction; }));
  k.push_back(number_key<double>("synth.label_noise", "probability of a uniformly random label",
                                 [](RunConfig& c) -> auto& { return c.synth.label_noise; }));
  k.push_back(number_key<double>("synth.theta", "polarity threshold on the stance score",
                                 [](RunConfig& c) -> auto& { return c.synth.theta; }));
  k.push_back(number_key<int>("synth.history_posts", "posts per non-lurker",
                              [](RunConfig& c) -> auto& { return c.synth.history_posts; }));
  k.push_back(number_key<std::uint64_t>("synth.seed", "world seed", [](RunConfig& c) -> auto& { return c.synth.seed; }));

  k.push_back(number_key<int>("hgt.layers", "propagation layers", [](RunConfig& c) -> auto& { return c.hgt.layers; }));
  k.push_back(number_key<int>("hgt.heads", "attention heads", [](RunConfig& c) -> auto& { return c.hgt.heads; }));
  k.push_back(number_key<int>("hgt.dim", "hidden and embedding size", [](RunConfig& c) -> auto& { return c.hgt.dim; }));
  k.push_back(number_key<double>("hgt.dropout", "dropout rate", [](RunConfig& c) -> auto& { return c.hgt.dropout; }));
  k.push_back({"hgt.activation", "relu | tanh",
               [](RunConfig& c, std::string_view v) {
                 try {
                   c.hgt.activation = hgt::parse_activation(v);
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(e.what());
                 }
               },
               [](const RunConfig& c) { return std::string(hgt::to_string(c.hgt.activation)); }});

  k.push_back(number_key<double>("train.learning_rate", "peak learning rate",
                                 [](RunConfig& c) -> auto& { return c.train.learning_rate; }));
  k.push_back(number_key<double>("train.weight_decay", "decoupled weight decay",
                                 [](RunConfig& c) -> auto& { return c.train.weight_decay; }));
  k.push_back(number_key<double>("train.beta1", "first moment decay", [](RunConfig& c) -> auto& { return c.train.beta1; }));
  k.push_back(number_key<double>("train.beta2", "second moment decay", [](RunConfig& c) -> auto& { return c.train.beta2; }));
  k.push_back(number_key<double>("train.epsilon", "optimizer epsilon", [](RunConfig& c) -> auto& { return c.train.epsilon; }));
  k.push_back(number_key<int>("train.epochs", "maximum epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
  k.push_back(number_key<int>("train.patience", "epochs without dev improvement before stopping",
                              [](RunConfig& c) -> auto& { return c.train.patience; }));
  k.push_back(number_key<double>("train.warmup_ratio", "share of steps spent warming up",
                                 [](RunConfig& c) -> auto& { return c.train.warmup_ratio; }));
  k.push_back(number_key<int>("train.batch_size", "pairs per step; 0 = one step per epoch",
                              [](RunConfig& c) -> auto& { return c.train.batch_size; }));
  k.push_back({"train.task", "joint | polarity | intensity",
               [](RunConfig& c, std::string_view v) {
                 try {
                   c.train.task = hgt::parse_task(v);
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(e.what());
                 }
               },
               [](const RunConfig& c) { return std::string(hgt::to_string(c.train.task)); }});

  k.push_back(string_key("client.base_url", "OpenAI-compatible API base URL",
                         [](RunConfig& c) -> auto& { return c.client.remote.base_url; }));
  k.push_back(string_key("client.model", "chat model name", [](RunConfig& c) -> auto& { return c.client.remote.model; }));
  k.push_back(number_key<double>("client.temperature", "sampling temperature",
                                 [](RunConfig& c) -> auto& { return c.client.remote.temperature; }));
  k.push_back(number_key<int>("client.max_retries", "transport retries",
                              [](RunConfig& c) -> auto& { return c.client.remote.max_retries; }));
  k.push_back(number_key<double>("client.requests_per_second", "rate cap; <= 0 disables",
                                 [](RunConfig& c) -> auto& { return c.client.remote.requests_per_second; }));
  k.push_back(string_key("client.token_env", "environment variable holding the API token",
                         [](RunConfig& c) -> auto& { return c.client.remote.token_env; }));
  k.push_back({"client.timeout", "request timeout in seconds",
               [](RunConfig& c, std::string_view v) {
                 c.client.remote.timeout = std::chrono::seconds(parse_number<long>("client.timeout", v));
               },
               [](const RunConfig& c) { return std::to_string(c.client.remote.timeout.count()); }});
  k.push_back(bool_key("client.mock", "use the deterministic offline client",
                       [](RunConfig& c) -> auto& { return c.client.mock; }));
  k.push_back(number_key<unsigned>("client.threads", "concurrent LLM workers",
                                   [](RunConfig& c) -> auto& { return c.client.threads; }));

  k.push_back(bool_key("ablation.without_belief", "drop belief nodes and edges",
                       [](RunConfig& c) -> auto& { return c.ablation.without_belief; }));
  k.push_back(bool_key("ablation.without_user_news", "drop user-news interaction edges",
                       [](RunConfig& c) -> auto& { return c.ablation.without_user_news; }));
  k.push_back(bool_key("ablation.without_profile", "embed users without their profile",
                       [](RunConfig& c) -> auto& { return c.ablation.without_profile; }));
  k.push_back(bool_key("ablation.without_history", "embed users without their history",
                       [](RunConfig& c) -> auto& { return c.ablation.without_history; }));
  k.push_back(bool_key("ablation.random_init", "random user and media vectors",
                       [](RunConfig& c) -> auto& { return c.ablation.random_init; }));

  k.push_back(string_key("embed.provider", "hash | random | file", [](RunConfig& c) -> auto& { return c.embed_provider; }));
  k.push_back(number_key<std::size_t>("graph.influencers", "keep responders plus this many top accounts; 0 keeps all",
                                      [](RunConfig& c) -> auto& { return c.influencers; }));
  k.push_back(number_key<std::size_t>("persona.history_cap", "most recent posts shown to the LLM",
                                      [](RunConfig& c) -> auto& { return c.history_cap; }));

  k.push_back({"eval.split", "train | dev | test",
               [](RunConfig& c, std::string_view v) {
                 try {
                   c.eval.split = parse_split(v);
                 } catch (const std::exception& e) {
                   throw ConfigError(e.what());
                 }
               },
               [](const RunConfig& c) { return std::string(to_string(c.eval.split)); }});
  k.push_back(bool_key("eval.lurkers", "add the lurker subset", [](RunConfig& c) -> auto& { return c.eval.lurkers; }));
  k.push_back(bool_key("eval.unseen", "add the unseen-user subset", [](RunConfig& c) -> auto& { return c.eval.unseen; }));
  k.push_back(bool_key("eval.by_belief", "add per-belief segments",
                       [](RunConfig& c) -> auto& { return c.eval.by_belief; }));
  k.push_back(number_key<std::size_t>("eval.lurker_threshold", "history size below which a user is a lurker",
                                      [](RunConfig& c) -> auto& { return c.eval.lurker_threshold; }));

  k.push_back(string_key("zeroshot.mode", "baseline | latent | social",
                         [](RunConfig& c) -> auto& { return c.zeroshot_mode; }));
  k.push_back(number_key<std::size_t>("zeroshot.k", "neighbors in the social context",
                                      [](RunConfig& c) -> auto& { return c.zeroshot_k; }));
  return k;
}

std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void RunConfig::validate() const {
  try {
    hgt.validate();
    train.validate();
    synth.validate();
    parse_zero_shot_mode(zeroshot_mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (embed_provider != "hash" && embed_provider != "random" && embed_provider != "file")
    throw ConfigError("embed.provider must be hash, random or file");
  if (embed_provider == "file" && paths.embedding_file.empty())
    throw ConfigError("embed.provider=file needs paths.embedding_file");
  if (client.threads < 1) throw ConfigError("client.threads must be >= 1");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& k : config_keys())
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  throw ConfigError("unknown config key \"" + std::string(key) + "\"");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text, std::string_view source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = strip(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = strip(std::string_view(line).substr(0, eq));
    std::string value = strip(std::string_view(line).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError(where + "empty key");
    out.emplace_back(section.empty() ? key : section + "." + key, value);
  }
  return out;
}

void apply_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  for (const auto& [key, value] : parse_config_text(buf.str(), path.string())) {
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

std::string dump_config(const RunConfig& config) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::string out;
  for (const auto& k : config_keys()) {
    const auto dot = k.name.find('.');
    if (dot == std::string::npos) {
      out += k.name + " = " + k.get(config) + "\n";
      continue;
    }
    sections[k.name.substr(0, dot)].emplace_back(k.name.substr(dot + 1), k.get(config));
  }
  for (const auto& [section, entries] : sections) {
    out += "\n[" + section + "]\n";
    for (const auto& [key, value] : entries) out += key + " = \"" + value + "\"\n";
  }
  return out;
}

}  // namespace beliefcast
