#include "beliefcast/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace beliefcast {

using nlohmann::json;

namespace {

template <typename T>
void sort_unique(std::vector<T>& items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
}

std::optional<std::size_t> find_sorted(const std::vector<std::string>& items, std::string_view key) {
  auto it = std::lower_bound(items.begin(), items.end(), key,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == items.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - items.begin());
}

}  // namespace

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::User: return "user";
    case NodeKind::Media: return "media";
    case NodeKind::Belief: return "belief";
  }
  return "user";
}

std::optional<std::size_t> HeteroGraph::user_index(std::string_view id) const {
  return find_sorted(users, id);
}

std::optional<std::size_t> HeteroGraph::media_index(std::string_view id) const {
  return find_sorted(media, id);
}

std::optional<std::size_t> HeteroGraph::belief_index(Belief b) const {
  auto it = std::lower_bound(beliefs.begin(), beliefs.end(), b);
  if (it == beliefs.end() || *it != b) return std::nullopt;
  return static_cast<std::size_t>(it - beliefs.begin());
}

bool HeteroGraph::contains(const NodeRef& node) const {
  switch (node.kind) {
    case NodeKind::User: return user_index(node.key).has_value();
    case NodeKind::Media: return media_index(node.key).has_value();
    case NodeKind::Belief: {
      auto b = parse_belief(node.key);
      return b && to_string(*b) == node.key && belief_index(*b).has_value();
    }
  }
  return false;
}

std::vector<Belief> HeteroGraph::beliefs_of(std::string_view user) const {
  std::vector<Belief> out;
  auto it = std::lower_bound(belief_edges.begin(), belief_edges.end(), user,
                             [](const auto& e, std::string_view u) { return e.first < u; });
  for (; it != belief_edges.end() && it->first == user; ++it) out.push_back(it->second);
  return out;
}

void check_integrity(const HeteroGraph& g) {
  auto require_sorted = [](const auto& items, const char* what) {
    for (std::size_t i = 1; i < items.size(); ++i)
      if (!(items[i - 1] < items[i]))
        throw DataError(std::string("graph: ") + what + " not sorted or has duplicates");
  };
  require_sorted(g.users, "users");
  require_sorted(g.media, "media");
  require_sorted(g.beliefs, "beliefs");
  require_sorted(g.follow, "follow edges");
  require_sorted(g.interact, "interact edges");
  require_sorted(g.belief_edges, "belief edges");
  for (const auto& [a, b] : g.follow)
    if (!g.user_index(a) || !g.user_index(b))
      throw DataError("graph: follow edge " + a + " -> " + b + " has an unknown endpoint");
  for (const auto& [u, m] : g.interact)
    if (!g.user_index(u) || !g.media_index(m))
      throw DataError("graph: interact edge " + u + " -> " + m + " has an unknown endpoint");
  for (const auto& [u, b] : g.belief_edges)
    if (!g.user_index(u) || !g.belief_index(b))
      throw DataError("graph: belief edge " + u + " -> " + std::string(to_string(b)) +
                      " has an unknown endpoint");
}

std::vector<std::string> select_influencers(const std::vector<std::string>& seed_users,
                                            const std::vector<FollowEdge>& follows,
                                            std::size_t top_n) {
  std::map<std::string, std::size_t> in_degree;
  for (const auto& s : seed_users) in_degree.emplace(s, 0);
  for (const auto& e : follows) in_degree[e.dst] += 1;

  std::vector<std::pair<std::string, std::size_t>> ranked(in_degree.begin(), in_degree.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  ranked.resize(std::min(top_n, ranked.size()));
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [id, _] : ranked) out.push_back(std::move(id));
  return out;
}

HeteroGraph build_graph(const Dataset& dataset, const std::vector<LatentPersona>& personas,
                        const GraphOptions& options) {
  HeteroGraph g;
  if (options.influencer_top_n) {
    std::vector<std::string> seeds;
    for (const auto& r : dataset.responses) seeds.push_back(r.user_id);
    sort_unique(seeds);
    g.users = select_influencers(seeds, dataset.follows, *options.influencer_top_n);
    g.users.insert(g.users.end(), seeds.begin(), seeds.end());
  } else {
    for (const auto& u : dataset.users) g.users.push_back(u.id);
  }
  sort_unique(g.users);

  for (const auto& n : dataset.news) g.media.push_back(n.id);
  sort_unique(g.media);
  g.beliefs.assign(all_beliefs().begin(), all_beliefs().end());

  for (const auto& f : dataset.follows)
    if (g.user_index(f.src) && g.user_index(f.dst) && f.src != f.dst) g.follow.emplace_back(f.src, f.dst);
  sort_unique(g.follow);

  for (const auto& r : dataset.responses)
    if (r.split == Split::Train && g.user_index(r.user_id) && g.media_index(r.news_id))
      g.interact.emplace_back(r.user_id, r.news_id);
  sort_unique(g.interact);

  for (const auto& p : personas) {
    if (!dataset.find_user(p.user_id))
      throw DataError("persona references unknown user \"" + p.user_id + "\"");
    if (!g.user_index(p.user_id)) continue;
    for (Belief b : p.beliefs()) g.belief_edges.emplace_back(p.user_id, b);
  }
  sort_unique(g.belief_edges);

  g = apply_ablation(std::move(g), options.ablation);
  check_integrity(g);
  return g;
}

HeteroGraph apply_ablation(HeteroGraph graph, const AblationOptions& ablation) {
  if (ablation.without_belief) {
    graph.beliefs.clear();
    graph.belief_edges.clear();
  }
  if (ablation.without_user_news) graph.interact.clear();
  return graph;
}

std::vector<Relation> active_relations(const AblationOptions& ablation) {
  std::vector<Relation> out{Relation::Follow};
  if (!ablation.without_user_news) out.push_back(Relation::Interact);
  if (!ablation.without_belief) out.push_back(Relation::BelievesIn);
  return out;
}

double distant_shared_belief_ratio(const HeteroGraph& g) {
  const std::size_t n = g.users.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : g.follow) {
    const auto i = *g.user_index(a), j = *g.user_index(b);
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  // Users holding each belief.
  std::map<Belief, std::vector<std::size_t>> holders;
  std::vector<std::vector<Belief>> held(n);
  for (const auto& [u, b] : g.belief_edges) {
    const auto i = *g.user_index(u);
    holders[b].push_back(i);
    held[i].push_back(b);
  }

  constexpr std::size_t kUnreached = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(n, kUnreached);
  std::size_t denominator = 0, numerator = 0;
  for (std::size_t src = 0; src < n; ++src) {
    if (held[src].empty()) continue;
    ++denominator;
    std::fill(dist.begin(), dist.end(), kUnreached);
    std::deque<std::size_t> queue{src};
    dist[src] = 0;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      if (dist[v] >= 1) continue;  // only distances 0 and 1 matter
      for (auto w : adj[v])
        if (dist[w] == kUnreached) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
    }
    bool distant = false;
    for (Belief b : held[src]) {
      for (auto other : holders[b])
        if (other != src && (dist[other] == kUnreached || dist[other] >= 2)) {
          distant = true;
          break;
        }
      if (distant) break;
    }
    if (distant) ++numerator;
  }
  return denominator == 0 ? 0.0 : static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::vector<NodeRef> neighbors(const HeteroGraph& g, const NodeRef& node, Relation relation,
                               Direction direction) {
  if (!g.contains(node))
    throw DataError("unknown " + std::string(to_string(node.kind)) + " node \"" + node.key + "\"");
  std::vector<NodeRef> out;
  switch (relation) {
    case Relation::Follow:
      if (node.kind != NodeKind::User) break;
      for (const auto& [a, b] : g.follow) {
        if (direction == Direction::Out && a == node.key) out.push_back({NodeKind::User, b});
        if (direction == Direction::In && b == node.key) out.push_back({NodeKind::User, a});
      }
      break;
    case Relation::Interact:
      for (const auto& [u, m] : g.interact) {
        if (node.kind == NodeKind::User && direction == Direction::Out && u == node.key)
          out.push_back({NodeKind::Media, m});
        if (node.kind == NodeKind::Media && direction == Direction::In && m == node.key)
          out.push_back({NodeKind::User, u});
      }
      break;
    case Relation::BelievesIn:
      for (const auto& [u, b] : g.belief_edges) {
        if (node.kind == NodeKind::User && u == node.key)
          out.push_back({NodeKind::Belief, std::string(to_string(b))});
        if (node.kind == NodeKind::Belief && to_string(b) == node.key)
          out.push_back({NodeKind::User, u});
      }
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

GraphStats graph_stats(const HeteroGraph& g) {
  GraphStats s;
  s.users = g.users.size();
  s.media = g.media.size();
  s.beliefs = g.beliefs.size();
  s.follow_edges = g.follow.size();
  s.interact_edges = g.interact.size();
  s.belief_edges = g.belief_edges.size();
  for (const auto& [u, b] : g.belief_edges) ++s.belief_histogram[b];
  return s;
}

std::string to_json(const HeteroGraph& g) {
  std::vector<std::string> beliefs;
  for (Belief b : g.beliefs) beliefs.emplace_back(to_string(b));
  std::sort(beliefs.begin(), beliefs.end());

  auto pairs = [](const auto& edges, auto second) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : edges) out.emplace_back(e.first, second(e.second));
    std::sort(out.begin(), out.end());
    json arr = json::array();
    for (auto& [a, b] : out) arr.push_back({a, b});
    return arr;
  };
  auto same = [](const std::string& s) { return s; };
  auto name = [](Belief b) { return std::string(to_string(b)); };

  json doc;
  doc["users"] = g.users;
  doc["media"] = g.media;
  doc["beliefs"] = beliefs;
  doc["follow"] = pairs(g.follow, same);
  doc["interact"] = pairs(g.interact, same);
  doc["belief_edges"] = pairs(g.belief_edges, name);
  return doc.dump() + "\n";
}

HeteroGraph graph_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("graph.json: ") + e.what());
  }
  auto belief = [](const std::string& s) {
    auto b = parse_belief(s);
    if (!b || to_string(*b) != s) throw DataError("graph.json: unknown belief symbol \"" + s + "\"");
    return *b;
  };
  HeteroGraph g;
  try {
    g.users = doc.at("users").get<std::vector<std::string>>();
    g.media = doc.at("media").get<std::vector<std::string>>();
    for (const auto& s : doc.at("beliefs").get<std::vector<std::string>>()) g.beliefs.push_back(belief(s));
    for (const auto& e : doc.at("follow")) g.follow.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    for (const auto& e : doc.at("interact"))
      g.interact.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    for (const auto& e : doc.at("belief_edges"))
      g.belief_edges.emplace_back(e.at(0).get<std::string>(), belief(e.at(1).get<std::string>()));
  } catch (const json::exception& e) {
    throw DataError(std::string("graph.json: ") + e.what());
  }
  std::sort(g.beliefs.begin(), g.beliefs.end());
  std::sort(g.belief_edges.begin(), g.belief_edges.end());
  check_integrity(g);
  return g;
}

void write_graph(const std::filesystem::path& path, const HeteroGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(graph);
}

HeteroGraph read_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return graph_from_json(buf.str());
}

}  // namespace beliefcast
