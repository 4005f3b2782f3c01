#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "beliefcast/checkpoint.hpp"
#include "beliefcast/datamodel.hpp"
#include "beliefcast/embed.hpp"
#include "beliefcast/graph.hpp"
#include "beliefcast/metrics.hpp"
#include "beliefcast/train.hpp"

namespace beliefcast {

/// Samples for `responses`, with user and news ids mapped to graph nodes.
std::vector<hgt::Sample> make_samples(const HeteroGraph& graph, const std::vector<ResponseRecord>& responses);

/// Train/dev samples and node features for the trainer.
hgt::TrainProblem make_problem(const HeteroGraph& graph, const EmbeddingTable& table, const Dataset& dataset);

struct EvalOptions {
  Split split = Split::Test;
  bool lurkers = false;
  bool unseen = false;
  bool by_belief = false;
  std::size_t lurker_threshold = 50;
};

/// Evaluates `model` on a split. Subsets go to EvalReport::subsets under
/// "lurkers" and "unseen"; belief segments use `personas` when given and the
/// graph's belief edges otherwise. `intensity_model`, when set, supplies the
/// intensity predictions (separately trained heads).
EvalReport evaluate_split(const HeteroGraph& graph, const EmbeddingTable& table, const Dataset& dataset,
                          const hgt::Checkpoint& model, const EvalOptions& options,
                          const std::vector<LatentPersona>* personas = nullptr,
                          const hgt::Checkpoint* intensity_model = nullptr);

struct ExperimentResult {
  hgt::TrainResult training;
  EvalReport test;  // with the "lurkers" subset
};

/// Graph, embeddings, training and lurker-aware test evaluation in one call.
ExperimentResult run_experiment(const Dataset& dataset, const std::vector<LatentPersona>& personas,
                                const AblationOptions& ablation, const hgt::HgtConfig& model,
                                const hgt::TrainConfig& train_config, const EmbeddingProvider& provider,
                                std::uint64_t embed_seed);

}  // namespace beliefcast
