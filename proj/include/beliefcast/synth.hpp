#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "beliefcast/datamodel.hpp"
#include "beliefcast/persona.hpp"

namespace beliefcast {

/// Planted-belief world: community-driven follows, community-independent
/// beliefs, and labels that are a fixed function of beliefs and news stance.
struct SynthConfig {
  int n_users = 300;
  int n_communities = 4;
  int beliefs_per_user = 3;
  double p_follow_intra = 0.08;
  double p_follow_inter = 0.004;
  int n_news = 10;
  int responses_per_news = 300;
  double lurker_fraction = 0.6;
  double label_noise = 0.1;
  double theta = 0.5;
  int history_posts = 60;  // for non-lurkers; must reach the lurker threshold
  std::uint64_t seed = 1;

  void validate() const;
};

struct World {
  Dataset dataset;
  std::vector<LatentPersona> gold_personas;             // one per user, dataset order
  std::vector<int> community;                            // per user
  std::vector<std::array<double, kBeliefCount>> stance;  // per news
};

/// Label for belief set `beliefs` under stance vector `stance`, before noise.
ResponseRecord planted_label(const std::vector<Belief>& beliefs, const std::array<double, kBeliefCount>& stance,
                             double theta);

/// Throws std::invalid_argument for invalid configs or when a split ends up
/// empty.
World generate_world(const SynthConfig& config);

struct WorldStats {
  double distant_shared_belief_ratio = 0.0;
  std::array<std::size_t, kPolarityClasses> polarity_counts{};
  std::array<std::size_t, kIntensityClasses> intensity_counts{};
  std::size_t lurkers = 0;
  std::size_t users = 0;
  std::size_t responses = 0;
};

WorldStats world_statistics(const Dataset& dataset, const std::vector<LatentPersona>& gold_personas);

/// Dataset files plus gold_personas.jsonl into `dir`.
void write_world(const World& world, const std::filesystem::path& dir);

}  // namespace beliefcast
