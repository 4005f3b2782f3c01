#include <fstream>
#include <sstream>

#include "beliefcast/cli.hpp"
#include "beliefcast/run_config.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/fixtures.hpp"

using namespace beliefcast;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "beliefcast");
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("config text parsing handles sections, quotes and comments") {
  const auto kv = parse_config_text(
      "seed = 7  # trailing\n"
      "[train]\n"
      "epochs = 12\n"
      "task = \"polarity # not a comment\"\n"
      "\n"
      "# full-line comment\n"
      "[hgt]\n"
      "activation=tanh\n");
  using KV = std::pair<std::string, std::string>;
  CHECK(kv == std::vector<KV>{{"seed", "7"},
                              {"train.epochs", "12"},
                              {"train.task", "polarity # not a comment"},
                              {"hgt.activation", "tanh"}});
  CHECK_THROWS_WITH_AS(parse_config_text("ok = 1\nbroken line\n", "x.toml"), doctest::Contains("x.toml:2"),
                       ConfigError);
}

TEST_CASE("config values are typed and unknown keys rejected") {
  RunConfig c;
  set_config_value(c, "train.epochs", "12");
  set_config_value(c, "hgt.activation", "tanh");
  set_config_value(c, "ablation.without_belief", "true");
  set_config_value(c, "synth.label_noise", "0.25");
  CHECK(c.train.epochs == 12);
  CHECK(c.hgt.activation == hgt::Activation::Tanh);
  CHECK(c.ablation.without_belief);
  CHECK(c.synth.label_noise == 0.25);
  CHECK_THROWS_AS(set_config_value(c, "train.epoch", "3"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "train.epochs", "three"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "train.epochs", "3x"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "ablation.without_belief", "maybe"), ConfigError);
}

TEST_CASE("dump_config lists every key and reloads to the same values") {
  RunConfig c;
  c.seed = 99;
  c.train.learning_rate = 0.0125;
  c.paths.out = "some dir";
  const std::string text = dump_config(c);
  for (const auto& k : config_keys()) CHECK(text.find(k.name.substr(k.name.find('.') + 1)) != std::string::npos);
  RunConfig back;
  for (const auto& [k, v] : parse_config_text(text)) set_config_value(back, k, v);
  CHECK(dump_config(back) == text);
  CHECK(back.seed == 99);
  CHECK(back.paths.out == "some dir");
}

TEST_CASE("help exits 0 and lists every subcommand key") {
  const auto top = run({"--help"});
  CHECK(top.code == 0);
  for (const char* sub : {"synth", "personas", "build-graph", "embed", "train", "eval", "zeroshot", "stats"})
    CHECK(top.out.find(sub) != std::string::npos);
  const auto train = run({"train", "--help"});
  CHECK(train.code == 0);
  CHECK(train.out.find("--train.learning_rate") != std::string::npos);
  CHECK(train.out.find("--hgt.dim") != std::string::npos);
}

TEST_CASE("usage and runtime errors are one-line JSON on stderr") {
  const auto usage = run({"train", "--no-such-flag"});
  CHECK(usage.code == 2);
  auto j = nlohmann::json::parse(usage.err);
  CHECK(j["error"] == "usage");

  fixtures::TempDir tmp("cli_err");
  const auto missing = run({"stats", "--paths.data", (tmp / "nothing").string()});
  CHECK(missing.code == 1);
  j = nlohmann::json::parse(missing.err);
  CHECK(j["error"] == "data");
  CHECK(missing.err.find('\n') == missing.err.size() - 1);

  write_file(tmp / "bad.toml", "[train]\nepochz = 3\n");
  const auto bad = run({"train", "--config", (tmp / "bad.toml").string()});
  CHECK(bad.code == 1);
  CHECK(nlohmann::json::parse(bad.err)["error"] == "config");

  const auto invalid = run({"synth", "--synth.n_users", "1", "--paths.data", (tmp / "d").string()});
  CHECK(invalid.code == 1);
}

TEST_CASE("the pipeline runs end to end and flags override the config file") {
  fixtures::TempDir tmp("cli_run");
  const std::string data = (tmp / "data").string(), out = (tmp / "runs").string();
  write_file(tmp / "run.toml",
             "seed = 5\n[paths]\ndata = \"" + data + "\"\nout = \"" + out +
                 "\"\n[synth]\nn_users = 60\nn_news = 3\nresponses_per_news = 40\n"
                 "[hgt]\ndim = 8\nlayers = 1\nheads = 2\n[train]\nepochs = 50\npatience = 2\nbatch_size = 32\n");
  const std::string cfg = (tmp / "run.toml").string();
  auto step = [&](std::vector<std::string> args) {
    args.push_back("--config");
    args.push_back(cfg);
    const auto r = run(args);
    INFO(args[0], ": ", r.err);
    REQUIRE(r.code == 0);
    return r;
  };
  const auto synth = step({"synth"});
  CHECK(nlohmann::json::parse(synth.out)["users"] == 60);
  step({"personas", "--mock"});
  step({"build-graph"});
  step({"embed"});
  step({"train", "--train.epochs", "3"});
  // The flag beats the file: three epochs, not fifty.
  std::ifstream hist(tmp / "runs" / "history.csv");
  int lines = 0;
  for (std::string l; std::getline(hist, l);) ++lines;
  CHECK(lines <= 4);

  const auto eval = step({"eval", "--lurkers"});
  const auto report = nlohmann::json::parse(eval.out);
  CHECK(report.contains("mif1"));
  CHECK(report.contains("lurkers"));
  CHECK(std::filesystem::exists(tmp / "runs" / "report.json"));

  const auto stats = step({"stats"});
  CHECK(nlohmann::json::parse(stats.out).contains("distant_shared_belief_ratio"));
}
