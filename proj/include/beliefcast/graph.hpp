#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "beliefcast/beliefs.hpp"
#include "beliefcast/datamodel.hpp"
#include "beliefcast/persona.hpp"

namespace beliefcast {

enum class NodeKind : std::uint8_t { User = 0, Media = 1, Belief = 2 };
inline constexpr int kNodeKinds = 3;

std::string_view to_string(NodeKind k);

struct NodeRef {
  NodeKind kind = NodeKind::User;
  std::string key;

  auto operator<=>(const NodeRef&) const = default;
};

enum class Relation : std::uint8_t { Follow, Interact, BelievesIn };
enum class Direction : std::uint8_t { Out, In };

/// Switches for the component ablations. The first two remove graph parts,
/// the rest change node initialization.
struct AblationOptions {
  bool without_belief = false;
  bool without_user_news = false;
  bool without_profile = false;
  bool without_history = false;
  bool random_init = false;

  bool operator==(const AblationOptions&) const = default;
};

struct GraphOptions {
  AblationOptions ablation;
  /// When set, user nodes are the responders plus this many of the most
  /// followed accounts; otherwise every dataset user becomes a node.
  std::optional<std::size_t> influencer_top_n;
};

/// Users, news media and belief nodes with follow, interaction and belief
/// edges. Node lists and edge lists are sorted and free of duplicates.
struct HeteroGraph {
  std::vector<std::string> users;
  std::vector<std::string> media;
  std::vector<Belief> beliefs;  // vocabulary order; empty when ablated
  std::vector<std::pair<std::string, std::string>> follow;    // (follower, followee)
  std::vector<std::pair<std::string, std::string>> interact;  // (user, news)
  std::vector<std::pair<std::string, Belief>> belief_edges;   // (user, belief)

  std::optional<std::size_t> user_index(std::string_view id) const;
  std::optional<std::size_t> media_index(std::string_view id) const;
  /// Position of `b` in `beliefs`.
  std::optional<std::size_t> belief_index(Belief b) const;
  bool contains(const NodeRef& node) const;

  /// Beliefs held by `user` in vocabulary order.
  std::vector<Belief> beliefs_of(std::string_view user) const;

  bool operator==(const HeteroGraph&) const = default;
};

/// Throws DataError when an edge endpoint is missing, an edge is duplicated,
/// or a list is out of order.
void check_integrity(const HeteroGraph& graph);

/// The `top_n` ids with the most followers in `follows`, among the seeds and
/// every followed account. Ties go to the smaller id. Returned in rank order.
std::vector<std::string> select_influencers(const std::vector<std::string>& seed_users,
                                            const std::vector<FollowEdge>& follows,
                                            std::size_t top_n);

/// Throws DataError when a persona names a user absent from the dataset.
HeteroGraph build_graph(const Dataset& dataset, const std::vector<LatentPersona>& personas,
                        const GraphOptions& options = {});

/// Drops belief nodes/edges and/or interaction edges per the flags. Text
/// flags do not affect the graph.
HeteroGraph apply_ablation(HeteroGraph graph, const AblationOptions& ablation);

/// Relations that survive the ablation, in declaration order.
std::vector<Relation> active_relations(const AblationOptions& ablation);

/// Fraction of belief-holding users that share a belief with some other user
/// at undirected follow distance >= 2 (unreachable counts). 0 when no user
/// holds a belief.
double distant_shared_belief_ratio(const HeteroGraph& graph);

/// Neighbors of `node` along `relation`, sorted by key. `direction` selects
/// out- or in-neighbors for follow and interaction edges and is ignored for
/// belief edges. Throws DataError for unknown nodes.
std::vector<NodeRef> neighbors(const HeteroGraph& graph, const NodeRef& node, Relation relation,
                               Direction direction = Direction::Out);

struct GraphStats {
  std::size_t users = 0;
  std::size_t media = 0;
  std::size_t beliefs = 0;
  std::size_t follow_edges = 0;
  std::size_t interact_edges = 0;
  std::size_t belief_edges = 0;
  std::map<Belief, std::size_t> belief_histogram;  // distinct users per belief

  std::size_t nodes() const { return users + media + beliefs; }
  std::size_t edges() const { return follow_edges + interact_edges + belief_edges; }
  bool operator==(const GraphStats&) const = default;
};

GraphStats graph_stats(const HeteroGraph& graph);

/// Canonical graph.json text (every list sorted ascending, trailing newline).
std::string to_json(const HeteroGraph& graph);
HeteroGraph graph_from_json(std::string_view text);
void write_graph(const std::filesystem::path& path, const HeteroGraph& graph);
HeteroGraph read_graph(const std::filesystem::path& path);

}  // namespace beliefcast
