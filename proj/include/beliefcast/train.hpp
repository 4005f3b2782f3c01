#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "beliefcast/hgt.hpp"
#include "beliefcast/loss.hpp"
#include "beliefcast/metrics.hpp"
#include "beliefcast/optim.hpp"

namespace beliefcast::hgt {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 1000;
  int patience = 300;
  double warmup_ratio = 0.06;
  /// Pairs per gradient step; 0 takes one step per epoch over all pairs.
  int batch_size = 1;
  std::uint64_t seed = 42;
  Task task = Task::Joint;
  /// Also evaluate the training pairs after every epoch.
  bool track_train_metrics = false;

  void validate() const;
  RAdamConfig optimizer() const { return {beta1, beta2, epsilon, weight_decay, true}; }
};

/// Everything the trainer needs, already mapped to node indices.
struct TrainProblem {
  Topology topology;
  Matrix<float> features;  // dim x nodes
  std::vector<Sample> train;
  std::vector<Sample> dev;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean per pair
  EvalReport dev;
  double lr = 0.0;  // at the last step of the epoch
  std::optional<EvalReport> train;
};

struct TrainResult {
  HgtParams<float> best;
  int best_epoch = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<EpochRecord> history;
};

/// Selection score used for early stopping: MaF1 + r_s for the joint task,
/// MaF1 for polarity and r_s for intensity (all in percent).
double selection_score(const EvalReport& dev, Task task);

/// Called after each epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Trains from `init` (or init_params(config.seed) when null). Deterministic
/// given the inputs and the seed.
TrainResult train(const TrainProblem& problem, const HgtConfig& model, const TrainConfig& config,
                  const HgtParams<float>* init = nullptr, const EpochCallback& on_epoch = {});

/// Argmax labels for each pair in eval mode.
std::vector<Label> predict(const Topology& topology, const Matrix<float>& features, const HgtParams<float>& params,
                           const HgtConfig& model, std::span<const NodePair> pairs);

std::vector<Label> gold_labels(std::span<const Sample> samples);

/// history.csv: epoch,train_loss,dev_r_s,dev_r,dev_mif1,dev_maf1,lr
void write_history(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace beliefcast::hgt
