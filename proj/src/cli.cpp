#include "beliefcast/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "beliefcast/checkpoint.hpp"
#include "beliefcast/embed.hpp"
#include "beliefcast/persona.hpp"
#include "beliefcast/pipeline.hpp"
#include "beliefcast/run_config.hpp"
#include "beliefcast/zeroshot.hpp"

namespace beliefcast {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Extra spellings for frequently used keys.
const std::map<std::string, std::string, std::less<>> kAliases = {
    {"client.mock", "--mock"},       {"eval.lurkers", "--lurkers"}, {"eval.unseen", "--unseen"},
    {"eval.by_belief", "--by-belief"}, {"zeroshot.mode", "--mode"}, {"zeroshot.k", "--k"},
};

struct Command {
  std::string name;
  std::string description;
  std::vector<std::string> sections;  // "seed" selects the top-level key
  std::function<void(const RunConfig&, std::ostream&)> run;
};

bool key_in(const std::string& key, const std::vector<std::string>& sections) {
  const auto dot = key.find('.');
  const std::string section = dot == std::string::npos ? key : key.substr(0, dot);
  return std::find(sections.begin(), sections.end(), section) != sections.end();
}

bool is_bool_key(const ConfigKey& key) {
  const std::string v = key.get(RunConfig{});
  return v == "true" || v == "false";
}

void require_file(const fs::path& path, std::string_view what) {
  if (!fs::exists(path)) throw DataError(std::string(what) + " not found: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

Dataset load_data(const RunConfig& c) {
  require_file(c.paths.data, "data directory");
  return load_dataset(c.paths.data);
}

HeteroGraph load_graph(const RunConfig& c) {
  require_file(c.paths.graph_path(), "graph");
  return read_graph(c.paths.graph_path());
}

EmbeddingTable load_embeddings(const RunConfig& c) {
  require_file(c.paths.embeddings_path(), "embeddings");
  return read_embeddings(c.paths.embeddings_path());
}

std::vector<LatentPersona> load_personas_if_present(const RunConfig& c) {
  const auto path = c.paths.personas_path();
  return fs::exists(path) ? read_personas(path) : std::vector<LatentPersona>{};
}

/// The configured client, wrapped in a replay layer when paths.replay is set.
struct ClientStack {
  std::shared_ptr<LlmClient> base;
  std::shared_ptr<ReplayClient> replay;
  LlmClient& client() { return replay ? static_cast<LlmClient&>(*replay) : *base; }
  void save(const RunConfig& c) const {
    if (replay) replay->save(c.paths.replay);
  }
};

ClientStack make_client(const RunConfig& c) {
  ClientStack s;
  if (c.client.mock)
    s.base = std::make_shared<MockClient>(c.seed);
  else
    s.base = std::make_shared<RemoteClient>(c.client.remote);
  if (!c.paths.replay.empty()) {
    s.replay = std::make_shared<ReplayClient>(s.base);
    if (fs::exists(c.paths.replay)) s.replay->load(c.paths.replay);
  }
  return s;
}

std::unique_ptr<PersonaCache> load_cache(const RunConfig& c) {
  if (c.paths.cache.empty()) return nullptr;
  auto cache = std::make_unique<PersonaCache>();
  if (fs::exists(c.paths.cache)) cache->load(c.paths.cache);
  return cache;
}

void cmd_synth(const RunConfig& c, std::ostream& out) {
  const World world = generate_world(c.synth);
  fs::create_directories(c.paths.data);
  write_world(world, c.paths.data);
  const WorldStats stats = world_statistics(world.dataset, world.gold_personas);
  ordered_json j;
  j["users"] = stats.users;
  j["lurkers"] = stats.lurkers;
  j["news"] = world.dataset.news.size();
  j["responses"] = stats.responses;
  j["follows"] = world.dataset.follows.size();
  j["distant_shared_belief_ratio"] = stats.distant_shared_belief_ratio;
  j["polarity_counts"] = stats.polarity_counts;
  j["intensity_counts"] = stats.intensity_counts;
  out << j.dump() << "\n";
}

void cmd_personas(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_data(c);
  auto stack = make_client(c);
  auto cache = load_cache(c);
  PersonaOptions options;
  options.history_cap = c.history_cap;
  const auto personas = extract_all(stack.client(), data.users, options, cache.get(), c.client.threads);
  write_personas(c.paths.personas_path(), personas);
  if (cache) cache->save(c.paths.cache);
  stack.save(c);
  ordered_json j;
  j["personas"] = personas.size();
  j["path"] = c.paths.personas_path().string();
  out << j.dump() << "\n";
}

void cmd_build_graph(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_data(c);
  std::vector<LatentPersona> personas;
  if (!c.ablation.without_belief) {
    require_file(c.paths.personas_path(), "personas");
    personas = read_personas(c.paths.personas_path());
  }
  GraphOptions options;
  options.ablation = c.ablation;
  if (c.influencers > 0) options.influencer_top_n = c.influencers;
  const HeteroGraph graph = build_graph(data, personas, options);
  write_graph(c.paths.graph_path(), graph);
  const GraphStats s = graph_stats(graph);
  ordered_json j;
  j["nodes"] = s.nodes();
  j["edges"] = s.edges();
  j["path"] = c.paths.graph_path().string();
  out << j.dump() << "\n";
}

void cmd_embed(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_data(c);
  const HeteroGraph graph = load_graph(c);
  std::unique_ptr<EmbeddingProvider> provider;
  if (c.embed_provider == "hash") {
    provider = std::make_unique<HashProvider>(c.hgt.dim);
  } else if (c.embed_provider == "random") {
    provider = std::make_unique<RandomProvider>(c.seed, c.hgt.dim);
  } else {
    require_file(c.paths.embedding_file, "embedding file");
    auto table = read_embeddings(c.paths.embedding_file);
    if (table.dim != c.hgt.dim)
      throw ConfigError("embedding file has dim " + std::to_string(table.dim) + ", hgt.dim is " +
                        std::to_string(c.hgt.dim));
    provider = std::make_unique<FileProvider>(std::move(table));
  }
  const EmbeddingTable table = build_table(graph, data, *provider, c.ablation, c.seed);
  write_embeddings(c.paths.embeddings_path(), table);
  ordered_json j;
  j["vectors"] = table.size();
  j["dim"] = table.dim;
  j["path"] = c.paths.embeddings_path().string();
  out << j.dump() << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_data(c);
  const HeteroGraph graph = load_graph(c);
  const EmbeddingTable table = load_embeddings(c);
  if (table.dim != c.hgt.dim)
    throw ConfigError("embeddings have dim " + std::to_string(table.dim) + ", hgt.dim is " +
                      std::to_string(c.hgt.dim));
  hgt::TrainConfig train = c.train;
  train.seed = c.seed;
  const auto result = hgt::train(make_problem(graph, table, data), c.hgt, train);
  if (c.paths.checkpoint_path().has_parent_path()) fs::create_directories(c.paths.checkpoint_path().parent_path());
  hgt::write_checkpoint(c.paths.checkpoint_path(), hgt::Checkpoint{c.hgt, train.task, result.best});
  std::ostringstream history;
  hgt::write_history(history, result.history);
  const fs::path history_path = fs::path(c.paths.out) / "history.csv";
  write_text(history_path, history.str());
  ordered_json j;
  j["epochs"] = result.history.size();
  j["best_epoch"] = result.best_epoch;
  j["best_score"] = result.best_score;
  j["checkpoint"] = c.paths.checkpoint_path().string();
  j["history"] = history_path.string();
  out << j.dump() << "\n";
}

void cmd_eval(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_data(c);
  const HeteroGraph graph = load_graph(c);
  const EmbeddingTable table = load_embeddings(c);
  require_file(c.paths.checkpoint_path(), "checkpoint");
  const hgt::Checkpoint model = hgt::read_checkpoint(c.paths.checkpoint_path());
  std::optional<hgt::Checkpoint> intensity;
  if (!c.paths.intensity_checkpoint.empty()) {
    require_file(c.paths.intensity_checkpoint, "intensity checkpoint");
    intensity = hgt::read_checkpoint(c.paths.intensity_checkpoint);
  }
  const auto personas = load_personas_if_present(c);
  EvalOptions options;
  options.split = c.eval.split;
  options.lurkers = c.eval.lurkers;
  options.unseen = c.eval.unseen;
  options.by_belief = c.eval.by_belief;
  options.lurker_threshold = c.eval.lurker_threshold;
  const EvalReport report = evaluate_split(graph, table, data, model, options,
                                           personas.empty() ? nullptr : &personas,
                                           intensity ? &*intensity : nullptr);
  const std::string text = report_to_json(report);
  const fs::path path = fs::path(c.paths.out) / "report.json";
  write_text(path, text);
  out << text;
}

void cmd_zeroshot(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_data(c);
  const HeteroGraph graph = load_graph(c);
  const ZeroShotMode mode = parse_zero_shot_mode(c.zeroshot_mode);
  const auto personas = load_personas_if_present(c);
  auto stack = make_client(c);
  auto cache = load_cache(c);
  ZeroShotOptions options;
  options.k = c.zeroshot_k;
  options.history_cap = c.history_cap;
  options.threads = c.client.threads;
  const ZeroShotRun run = run_zero_shot_eval(graph, data, stack.client(), mode, options,
                                             personas.empty() ? nullptr : &personas, cache.get());
  if (cache) cache->save(c.paths.cache);
  stack.save(c);
  std::ostringstream predictions;
  write_predictions(predictions, run.predictions);
  const fs::path dir = c.paths.out;
  write_text(dir / "zeroshot_predictions.jsonl", predictions.str());
  write_text(dir / "zeroshot_report.json", report_to_json(run.report));
  ordered_json j;
  j["mode"] = to_string(mode);
  j["k"] = c.zeroshot_k;
  j["predictions"] = run.predictions.size();
  j["failures"] = run.errors.size();
  j["path"] = (dir / "zeroshot_predictions.jsonl").string();
  out << j.dump() << "\n";
  for (const auto& e : run.errors) std::cerr << e << "\n";
}

void cmd_stats(const RunConfig& c, std::ostream& out) {
  const HeteroGraph graph = load_graph(c);
  const GraphStats s = graph_stats(graph);
  ordered_json j;
  j["users"] = s.users;
  j["media"] = s.media;
  j["beliefs"] = s.beliefs;
  j["follow_edges"] = s.follow_edges;
  j["interact_edges"] = s.interact_edges;
  j["belief_edges"] = s.belief_edges;
  ordered_json hist = ordered_json::object();
  for (const auto& [belief, users] : s.belief_histogram) hist[std::string(keyword(belief))] = users;
  j["belief_histogram"] = hist;
  j["distant_shared_belief_ratio"] = distant_shared_belief_ratio(graph);
  out << j.dump(2) << "\n";
}

std::vector<Command> commands() {
  return {
      {"synth", "Generate a synthetic world into paths.data", {"seed", "paths", "synth"}, cmd_synth},
      {"personas", "Extract latent personas for every user", {"seed", "paths", "client", "persona"}, cmd_personas},
      {"build-graph", "Build graph.json from the dataset and personas", {"paths", "graph", "ablation"},
       cmd_build_graph},
      {"embed", "Compute initial node embeddings", {"seed", "paths", "embed", "hgt", "ablation"}, cmd_embed},
      {"train", "Train the graph transformer", {"seed", "paths", "hgt", "train"}, cmd_train},
      {"eval", "Evaluate a checkpoint and write report.json", {"paths", "eval"}, cmd_eval},
      {"zeroshot", "Zero-shot prediction with an LLM",
       {"seed", "paths", "client", "persona", "zeroshot"}, cmd_zeroshot},
      {"stats", "Graph statistics and the distant-shared-belief ratio", {"paths"}, cmd_stats},
  };
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const hgt::CheckpointError*>(&e)) return "checkpoint";
  if (dynamic_cast<const EmbedError*>(&e)) return "embedding";
  if (dynamic_cast<const hgt::TrainError*>(&e)) return "train";
  if (dynamic_cast<const hgt::NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "internal";
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Belief-aware response prediction on social graphs", "beliefcast"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  RunConfig config;
  const auto& keys = config_keys();
  // Per subcommand: raw strings for each key, applied after the config file.
  struct Bound {
    CLI::App* app;
    std::string config_file;
    std::vector<std::pair<const ConfigKey*, CLI::Option*>> options;
    std::vector<std::string> values;
  };
  const auto cmds = commands();
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : cmds) {
    auto b = std::make_unique<Bound>();
    b->app = app.add_subcommand(cmd.name, cmd.description);
    b->app->add_option("--config", b->config_file, "Config file; flags override its values")
        ->check(CLI::ExistingFile);
    std::size_t count = 0;
    for (const auto& k : keys) count += key_in(k.name, cmd.sections);
    b->values.resize(count);
    std::size_t i = 0;
    for (const auto& k : keys) {
      if (!key_in(k.name, cmd.sections)) continue;
      std::string names = "--" + k.name;
      if (auto a = kAliases.find(k.name); a != kAliases.end()) names += "," + a->second;
      const std::string fallback = k.get(RunConfig{});
      const std::string help = fallback.empty() ? k.help : k.help + " (default: " + fallback + ")";
      CLI::Option* opt = is_bool_key(k) ? b->app->add_flag(names, b->values[i], help)
                                        : b->app->add_option(names, b->values[i], help);
      b->options.emplace_back(&k, opt);
      ++i;
    }
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return 2;
  }

  for (std::size_t c = 0; c < cmds.size(); ++c) {
    const Bound& b = *bound[c];
    if (!b.app->parsed()) continue;
    try {
      if (!b.config_file.empty()) apply_config_file(config, b.config_file);
      for (std::size_t i = 0; i < b.options.size(); ++i)
        if (b.options[i].second->count() > 0) b.options[i].first->set(config, b.values[i]);
      config.validate();
      cmds[c].run(config, out);
      return 0;
    } catch (const std::exception& e) {
      report_error(err, error_kind(e), e.what());
      return 1;
    }
  }
  report_error(err, "usage", "no subcommand");
  return 2;
}

int dispatch(int argc, const char* const* argv) {
  return dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace beliefcast
