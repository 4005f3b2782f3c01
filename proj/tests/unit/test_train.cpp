#include <sstream>

#include "beliefcast/optim.hpp"
#include "beliefcast/pipeline.hpp"
#include "beliefcast/synth.hpp"
#include "beliefcast/train.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace beliefcast;
using namespace beliefcast::hgt;

namespace {

HgtConfig tiny_model() {
  HgtConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 16;
  c.dropout = 0.0;
  return c;
}

TrainProblem small_problem() {
  SynthConfig sc;
  sc.n_users = 60;
  sc.n_communities = 2;
  sc.n_news = 4;
  sc.responses_per_news = 40;
  sc.history_posts = 5;
  sc.seed = 3;
  const World w = generate_world(sc);
  const HeteroGraph g = build_graph(w.dataset, w.gold_personas);
  const EmbeddingTable table = build_table(g, w.dataset, HashProvider(16), {}, 1);
  return make_problem(g, table, w.dataset);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.learning_rate = 5e-3;
  c.epochs = 6;
  c.patience = 100;
  c.batch_size = 16;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("loss strictly decreases over five small optimizer steps") {
  SplitMix rng(1);
  const auto g = fixtures::random_toy_graph(2);
  auto cfg = tiny_model();
  cfg.dim = 8;
  const Matrix<float> x = fixtures::random_features(cfg.dim, g.topology.nodes(), rng).cast<float>();
  const auto samples = fixtures::random_samples(g, 6, rng);
  std::vector<NodePair> pairs;
  for (const auto& s : samples) pairs.push_back(s.pair);

  HgtParams<float> params = init_params<float>(cfg, 4);
  auto views = tensors(params);
  RAdamState<float> state;
  RAdamConfig opt;
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 5; ++step) {
    const auto fwd = model_forward(g.topology, x, params, cfg, pairs, Mode::Train);
    Matrix<float> d_logits;
    const float scale = 1.0f / static_cast<float>(samples.size());
    const double loss = task_loss(fwd.logits, std::span<const Sample>(samples), Task::Joint, &d_logits, scale);
    CHECK(loss < previous);
    previous = loss;
    auto grads = backward(fwd.trace, g.topology, params, cfg, d_logits);
    auto grad_views = tensors(grads);
    radam_step(state, views, grad_views, opt, 1e-3);
  }
}

TEST_CASE("unrectified RAdam without decay is bias-corrected momentum SGD") {
  SplitMix rng(5);
  Matrix<double> theta = Matrix<double>::Random(3, 2), reference = theta, m = Matrix<double>::Zero(3, 2);
  std::vector<TensorView<double>> params{{"w", Eigen::Map<Matrix<double>>(theta.data(), 3, 2)}};
  RAdamState<double> state;
  RAdamConfig cfg;
  cfg.rectify = false;
  cfg.weight_decay = 0.0;
  for (int t = 1; t <= 50; ++t) {
    Matrix<double> g(3, 2);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform(-1.0, 1.0);
    std::vector<TensorView<double>> grads{{"w", Eigen::Map<Matrix<double>>(g.data(), 3, 2)}};
    radam_step(state, params, grads, cfg, 0.01);
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    reference -= 0.01 * m / (1 - std::pow(cfg.beta1, t));
  }
  CHECK((theta - reference).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("RAdam applies decoupled weight decay before the update") {
  Matrix<double> theta = Matrix<double>::Constant(2, 2, 2.0), zero = Matrix<double>::Zero(2, 2);
  std::vector<TensorView<double>> params{{"w", Eigen::Map<Matrix<double>>(theta.data(), 2, 2)}};
  std::vector<TensorView<double>> grads{{"w", Eigen::Map<Matrix<double>>(zero.data(), 2, 2)}};
  RAdamState<double> state;
  RAdamConfig cfg;
  cfg.weight_decay = 0.1;
  radam_step(state, params, grads, cfg, 0.5);
  CHECK(theta(0, 0) == doctest::Approx(2.0 * (1 - 0.05)));

  Matrix<double> nan = Matrix<double>::Constant(2, 2, std::numeric_limits<double>::quiet_NaN());
  std::vector<TensorView<double>> bad{{"w", Eigen::Map<Matrix<double>>(nan.data(), 2, 2)}};
  CHECK_THROWS_AS(radam_step(state, params, bad, cfg, 0.5), NumericError);
}

TEST_CASE("rectified RAdam steps are bounded by the learning rate once warmed up") {
  Matrix<double> theta = Matrix<double>::Zero(1, 1), g = Matrix<double>::Constant(1, 1, 3.0);
  std::vector<TensorView<double>> params{{"w", Eigen::Map<Matrix<double>>(theta.data(), 1, 1)}};
  std::vector<TensorView<double>> grads{{"w", Eigen::Map<Matrix<double>>(g.data(), 1, 1)}};
  RAdamState<double> state;
  RAdamConfig cfg;
  cfg.weight_decay = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double before = theta(0, 0);
    radam_step(state, params, grads, cfg, 0.01);
    if (t > 10) CHECK(before - theta(0, 0) <= 0.01 * (1 + 1e-9));
  }
}

TEST_CASE("learning-rate schedule warms up then decays linearly") {
  CHECK(lr_schedule(0, 100, 1.0, 0.06) == 0.0);
  CHECK(lr_schedule(3, 100, 1.0, 0.06) == doctest::Approx(0.5));
  CHECK(lr_schedule(6, 100, 1.0, 0.06) == doctest::Approx(1.0));
  CHECK(lr_schedule(53, 100, 1.0, 0.06) == doctest::Approx(0.5));
  CHECK(lr_schedule(100, 100, 1.0, 0.06) == 0.0);
  CHECK(lr_schedule(1, 1, 2.0, 0.0) == 0.0);
  CHECK_THROWS_AS(lr_schedule(101, 100, 1.0, 0.06), std::invalid_argument);
}

TEST_CASE("selection score depends on the task") {
  EvalReport r;
  r.maf1 = 40;
  r.r_s = 25;
  CHECK(selection_score(r, Task::Joint) == 65);
  CHECK(selection_score(r, Task::Polarity) == 40);
  CHECK(selection_score(r, Task::Intensity) == 25);
}

TEST_CASE("training is deterministic and keeps the best dev epoch") {
  const TrainProblem problem = small_problem();
  const auto model = tiny_model();
  auto cfg = quick_config();
  const TrainResult a = train(problem, model, cfg);
  const TrainResult b = train(problem, model, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].train_loss == b.history[i].train_loss);

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& rec : a.history) best = std::max(best, selection_score(rec.dev, cfg.task));
  CHECK(a.best_score == best);
  CHECK(selection_score(a.history[a.best_epoch - 1].dev, cfg.task) == best);

  std::vector<NodePair> pairs;
  for (const auto& s : problem.dev) pairs.push_back(s.pair);
  const auto report = evaluate(predict(problem.topology, problem.features, a.best, model, pairs),
                               gold_labels(problem.dev));
  CHECK(selection_score(report, cfg.task) == doctest::Approx(a.best_score));

  cfg.seed = 10;
  CHECK(train(problem, model, cfg).history[0].train_loss != a.history[0].train_loss);
}

TEST_CASE("early stopping halts after patience epochs without improvement") {
  const TrainProblem problem = small_problem();
  auto cfg = quick_config();
  cfg.epochs = 40;
  cfg.patience = 2;
  const TrainResult r = train(problem, tiny_model(), cfg);
  CHECK(static_cast<int>(r.history.size()) <= r.best_epoch + cfg.patience);
  for (int e = r.best_epoch; e < static_cast<int>(r.history.size()); ++e)
    CHECK(selection_score(r.history[e].dev, cfg.task) <= r.best_score);

  int calls = 0;
  const TrainResult stopped = train(problem, tiny_model(), quick_config(), nullptr, [&](const EpochRecord&) {
    return ++calls < 3;
  });
  CHECK(stopped.history.size() == 3);
}

TEST_CASE("full-batch mode takes one step per epoch") {
  const TrainProblem problem = small_problem();
  auto cfg = quick_config();
  cfg.batch_size = 0;
  cfg.epochs = 4;
  cfg.warmup_ratio = 0.0;
  cfg.track_train_metrics = true;
  const TrainResult r = train(problem, tiny_model(), cfg);
  REQUIRE(r.history.size() == 4);
  CHECK(r.history[0].lr == doctest::Approx(cfg.learning_rate * 3.0 / 4.0));
  CHECK(r.history[0].train.has_value());
}

TEST_CASE("trainer input validation") {
  TrainProblem problem = small_problem();
  auto cfg = quick_config();
  cfg.batch_size = -1;
  CHECK_THROWS_AS(train(problem, tiny_model(), cfg), std::invalid_argument);
  problem.dev.clear();
  CHECK_THROWS_AS(train(problem, tiny_model(), quick_config()), TrainError);
}

TEST_CASE("history csv has a fixed header and one row per epoch") {
  EpochRecord rec;
  rec.epoch = 1;
  rec.train_loss = 1.5;
  rec.dev.maf1 = 33.333;
  rec.lr = 1e-3;
  std::ostringstream out;
  write_history(out, {rec, rec});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,dev_r_s,dev_r,dev_mif1,dev_maf1,lr");
  std::getline(in, line);
  CHECK(line == "1,1.500000,0.00,0.00,0.00,33.33,0.001");
}
