#include "beliefcast/pipeline.hpp"

#include <set>

namespace beliefcast {

std::vector<hgt::Sample> make_samples(const HeteroGraph& graph, const std::vector<ResponseRecord>& responses) {
  std::vector<hgt::Sample> out;
  out.reserve(responses.size());
  for (const auto& r : responses)
    out.push_back({{hgt::user_node(graph, r.user_id), hgt::media_node(graph, r.news_id)},
                   static_cast<int>(r.polarity),
                   r.intensity});
  return out;
}

hgt::TrainProblem make_problem(const HeteroGraph& graph, const EmbeddingTable& table, const Dataset& dataset) {
  hgt::TrainProblem p;
  p.topology = hgt::Topology::from_graph(graph);
  p.features = hgt::assemble_features<float>(graph, table);
  p.train = make_samples(graph, dataset.split(Split::Train));
  p.dev = make_samples(graph, dataset.split(Split::Dev));
  return p;
}

namespace {

std::vector<Label> predict_records(const hgt::Topology& topo, const Eigen::MatrixXf& features,
                                   const HeteroGraph& graph, const hgt::Checkpoint& model,
                                   const hgt::Checkpoint* intensity_model,
                                   const std::vector<ResponseRecord>& records) {
  std::vector<hgt::NodePair> pairs;
  for (const auto& s : make_samples(graph, records)) pairs.push_back(s.pair);
  auto labels = hgt::predict(topo, features, model.params, model.config, pairs);
  if (intensity_model) {
    const auto inten = hgt::predict(topo, features, intensity_model->params, intensity_model->config, pairs);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i].intensity = inten[i].intensity;
  }
  return labels;
}

std::vector<Label> gold_of(const std::vector<ResponseRecord>& records) {
  std::vector<Label> out;
  for (const auto& r : records) out.push_back({r.polarity, r.intensity});
  return out;
}

}  // namespace

EvalReport evaluate_split(const HeteroGraph& graph, const EmbeddingTable& table, const Dataset& dataset,
                          const hgt::Checkpoint& model, const EvalOptions& options,
                          const std::vector<LatentPersona>* personas, const hgt::Checkpoint* intensity_model) {
  if (table.dim != model.config.dim)
    throw std::invalid_argument("embedding dim " + std::to_string(table.dim) + " does not match model dim " +
                                std::to_string(model.config.dim));
  const auto topo = hgt::Topology::from_graph(graph);
  const Eigen::MatrixXf features = hgt::assemble_features<float>(graph, table);
  const auto records = dataset.split(options.split);
  auto run = [&](const std::vector<ResponseRecord>& subset) {
    if (subset.empty()) return evaluate({}, {});
    return evaluate(predict_records(topo, features, graph, model, intensity_model, subset), gold_of(subset));
  };

  EvalReport report = run(records);
  if (options.lurkers)
    report.subsets["lurkers"] = run(lurker_split(dataset, records, options.lurker_threshold).first);
  if (options.unseen) report.subsets["unseen"] = run(unseen_user_split(dataset.split(Split::Train), records));
  if (options.by_belief && !records.empty()) {
    std::map<std::string, std::vector<Belief>, std::less<>> held;
    if (personas) {
      for (const auto& p : *personas) held[p.user_id] = p.beliefs();
    }
    std::vector<std::vector<Belief>> rows;
    for (const auto& r : records) {
      if (personas) {
        auto it = held.find(r.user_id);
        rows.push_back(it == held.end() ? std::vector<Belief>{} : it->second);
      } else {
        rows.push_back(graph.beliefs_of(r.user_id));
      }
    }
    report.by_belief = evaluate_by_belief(
        predict_records(topo, features, graph, model, intensity_model, records), gold_of(records), rows);
  }
  return report;
}

ExperimentResult run_experiment(const Dataset& dataset, const std::vector<LatentPersona>& personas,
                                const AblationOptions& ablation, const hgt::HgtConfig& model,
                                const hgt::TrainConfig& train_config, const EmbeddingProvider& provider,
                                std::uint64_t embed_seed) {
  GraphOptions graph_options;
  graph_options.ablation = ablation;
  const HeteroGraph graph = build_graph(dataset, personas, graph_options);
  const EmbeddingTable table = build_table(graph, dataset, provider, ablation, embed_seed);
  ExperimentResult result;
  result.training = hgt::train(make_problem(graph, table, dataset), model, train_config);
  const hgt::Checkpoint ckpt{model, train_config.task, result.training.best};
  EvalOptions eval;
  eval.lurkers = true;
  result.test = evaluate_split(graph, table, dataset, ckpt, eval);
  return result;
}

}  // namespace beliefcast
