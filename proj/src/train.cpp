#include "beliefcast/train.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "beliefcast/random.hpp"

namespace beliefcast::hgt {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (weight_decay < 0) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("train: betas must be in [0, 1)");
  if (!(epsilon > 0)) throw std::invalid_argument("train: epsilon must be positive");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (patience < 0) throw std::invalid_argument("train: patience must be >= 0");
  if (!(warmup_ratio >= 0 && warmup_ratio < 1)) throw std::invalid_argument("train: warmup_ratio must be in [0, 1)");
  if (batch_size < 0) throw std::invalid_argument("train: batch_size must be >= 0");
}

double selection_score(const EvalReport& dev, Task task) {
  switch (task) {
    case Task::Joint: return dev.maf1 + dev.r_s;
    case Task::Polarity: return dev.maf1;
    case Task::Intensity: return dev.r_s;
  }
  return 0.0;
}

std::vector<Label> predict(const Topology& topology, const Matrix<float>& features, const HgtParams<float>& params,
                           const HgtConfig& model, std::span<const NodePair> pairs) {
  const auto fwd = model_forward(topology, features, params, model, pairs, Mode::Eval);
  std::vector<Label> out;
  out.reserve(pairs.size());
  for (Eigen::Index j = 0; j < fwd.logits.cols(); ++j) {
    Eigen::Index pol = 0, inten = 0;
    fwd.logits.col(j).head(kPolarityClasses).maxCoeff(&pol);
    fwd.logits.col(j).tail(kIntensityClasses).maxCoeff(&inten);
    out.push_back({static_cast<Polarity>(pol), static_cast<int>(inten)});
  }
  return out;
}

std::vector<Label> gold_labels(std::span<const Sample> samples) {
  std::vector<Label> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({static_cast<Polarity>(s.polarity), s.intensity});
  return out;
}

namespace {

EvalReport evaluate_samples(const TrainProblem& p, const HgtParams<float>& params, const HgtConfig& model,
                            std::span<const Sample> samples) {
  std::vector<NodePair> pairs;
  for (const auto& s : samples) pairs.push_back(s.pair);
  return evaluate(predict(p.topology, p.features, params, model, pairs), gold_labels(samples));
}

}  // namespace

TrainResult train(const TrainProblem& problem, const HgtConfig& model, const TrainConfig& config,
                  const HgtParams<float>* init, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  if (problem.train.empty()) throw TrainError("train: empty train split");
  if (problem.dev.empty()) throw TrainError("train: empty dev split");

  HgtParams<float> params = init ? *init : init_params<float>(model, config.seed);
  auto param_views = tensors(params);
  RAdamState<float> opt;
  const RAdamConfig opt_cfg = config.optimizer();

  const long n = static_cast<long>(problem.train.size());
  const long batch = config.batch_size == 0 ? n : std::min<long>(config.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = steps_per_epoch * config.epochs;

  TrainResult result;
  std::vector<std::size_t> order(problem.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  long step = 0;
  int since_best = 0;
  std::vector<Sample> chunk;
  std::vector<NodePair> pairs;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    SplitMix shuffler(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (long start = 0; start < n; start += batch) {
      chunk.clear();
      pairs.clear();
      for (long i = start; i < std::min(n, start + batch); ++i) {
        chunk.push_back(problem.train[order[static_cast<std::size_t>(i)]]);
        pairs.push_back(chunk.back().pair);
      }
      const std::uint64_t dropout_seed = mix_seed(mix_seed(config.seed, fnv1a64("dropout")), static_cast<std::uint64_t>(step));
      ForwardResult<float> fwd;
      try {
        fwd = model_forward(problem.topology, problem.features, params, model, pairs, Mode::Train, dropout_seed);
      } catch (const NumericError& e) {
        throw TrainError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      // Gradient of the batch mean; with batch_size 1 this is the per-pair loss.
      Matrix<float> d_logits;
      const float scale = 1.0f / static_cast<float>(chunk.size());
      const float loss = task_loss(fwd.logits, std::span<const Sample>(chunk), config.task, &d_logits, scale);
      if (!std::isfinite(loss)) throw TrainError("training diverged at epoch " + std::to_string(epoch));
      loss_sum += static_cast<double>(loss) * static_cast<double>(chunk.size());
      HgtParams<float> grads = backward(fwd.trace, problem.topology, params, model, d_logits);
      auto grad_views = tensors(grads);
      ++step;
      lr = lr_schedule(step, total_steps, config.learning_rate, config.warmup_ratio);
      try {
        radam_step(opt, param_views, grad_views, opt_cfg, lr);
      } catch (const NumericError& e) {
        throw TrainError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.lr = lr;
    try {
      rec.dev = evaluate_samples(problem, params, model, problem.dev);
      if (config.track_train_metrics) rec.train = evaluate_samples(problem, params, model, problem.train);
    } catch (const NumericError& e) {
      throw TrainError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.history.push_back(rec);

    const double score = selection_score(rec.dev, config.task);
    if (epoch == 1 || score > result.best_score) {
      result.best_score = score;
      result.best_epoch = epoch;
      result.best = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (on_epoch && !on_epoch(rec)) break;
    if (since_best >= config.patience) break;
  }
  return result;
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,dev_r_s,dev_r,dev_mif1,dev_maf1,lr\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.2f,%.2f,%.2f,%.2f,%.6g\n", r.epoch, r.train_loss, r.dev.r_s, r.dev.r,
                  r.dev.mif1, r.dev.maf1, r.lr);
    out << buf;
  }
}

}  // namespace beliefcast::hgt
