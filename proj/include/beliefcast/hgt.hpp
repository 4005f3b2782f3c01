#pragma once

// Heterogeneous graph transformer over the user/media/belief graph, with a
// two-layer classification head and hand-written reverse-mode gradients.
// Everything is templated on the scalar type: training runs in float, the
// finite-difference gradient check in double.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "beliefcast/datamodel.hpp"
#include "beliefcast/embed.hpp"
#include "beliefcast/graph.hpp"
#include "beliefcast/random.hpp"

namespace beliefcast::hgt {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Schema

enum class EdgeType : std::uint8_t { Follows, FollowedBy, Interacts, InteractedBy, Believes, BelievedBy };
inline constexpr int kEdgeTypes = 6;

constexpr NodeKind source_kind(EdgeType e) {
  switch (e) {
    case EdgeType::Follows:
    case EdgeType::FollowedBy:
    case EdgeType::Interacts:
    case EdgeType::Believes: return NodeKind::User;
    case EdgeType::InteractedBy: return NodeKind::Media;
    case EdgeType::BelievedBy: return NodeKind::Belief;
  }
  return NodeKind::User;
}

constexpr NodeKind target_kind(EdgeType e) {
  switch (e) {
    case EdgeType::Follows:
    case EdgeType::FollowedBy:
    case EdgeType::InteractedBy:
    case EdgeType::BelievedBy: return NodeKind::User;
    case EdgeType::Interacts: return NodeKind::Media;
    case EdgeType::Believes: return NodeKind::Belief;
  }
  return NodeKind::User;
}

constexpr EdgeType reverse(EdgeType e) {
  const auto i = static_cast<int>(e);
  return static_cast<EdgeType>(i % 2 == 0 ? i + 1 : i - 1);
}

inline std::string_view to_string(EdgeType e) {
  constexpr std::array<std::string_view, kEdgeTypes> names = {
      "follows", "followed_by", "interacts", "interacted_by", "believes", "believed_by"};
  return names[static_cast<int>(e)];
}

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1 };
enum class Mode : std::uint8_t { Train, Eval };

inline std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation \"" + std::string(s) + "\"");
}

inline constexpr int kOutputs = kPolarityClasses + kIntensityClasses;

struct HgtConfig {
  int layers = 3;
  int heads = 4;
  int dim = 128;
  double dropout = 0.2;
  Activation activation = Activation::Relu;

  int head_dim() const { return dim / heads; }

  void validate() const {
    if (layers < 0) throw std::invalid_argument("hgt: layers must be >= 0");
    if (heads < 1 || dim < 1 || dim % heads != 0)
      throw std::invalid_argument("hgt: dim must be a positive multiple of heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("hgt: dropout must be in [0, 1)");
  }
  bool operator==(const HgtConfig&) const = default;
};

/// Integer view of a graph. Nodes are numbered users first, then media, then
/// beliefs, each block in the graph's order. Incoming edges are grouped by
/// target in CSR form.
struct Topology {
  std::array<int, kNodeKinds> count{};
  std::array<int, kNodeKinds> offset{};
  std::array<std::vector<std::pair<int, int>>, kEdgeTypes> edges;  // (source, target)
  std::vector<int> in_begin;                                         // size nodes() + 1
  std::vector<int> in_source;
  std::vector<EdgeType> in_type;

  int nodes() const { return offset[2] + count[2]; }
  int edge_count() const { return static_cast<int>(in_source.size()); }
  int in_degree(int node) const { return in_begin[node + 1] - in_begin[node]; }
  NodeKind kind_of(int node) const {
    return node < offset[1] ? NodeKind::User : node < offset[2] ? NodeKind::Media : NodeKind::Belief;
  }

  /// Builds the CSR from `edges`. Every forward edge gets its reverse type.
  /// Edge endpoints are validated against the node blocks.
  static Topology from_edges(std::array<int, kNodeKinds> counts,
                             const std::array<std::vector<std::pair<int, int>>, kEdgeTypes>& forward_and_reverse) {
    Topology t;
    t.count = counts;
    t.offset = {0, counts[0], counts[0] + counts[1]};
    t.edges = forward_and_reverse;
    const int n = t.nodes();
    for (int e = 0; e < kEdgeTypes; ++e) {
      const auto type = static_cast<EdgeType>(e);
      const int src_k = static_cast<int>(source_kind(type)), tgt_k = static_cast<int>(target_kind(type));
      for (auto [s, d] : t.edges[e])
        if (s < t.offset[src_k] || s >= t.offset[src_k] + t.count[src_k] || d < t.offset[tgt_k] ||
            d >= t.offset[tgt_k] + t.count[tgt_k])
          throw std::invalid_argument("topology: edge endpoint outside its node block");
    }
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (const auto& list : t.edges)
      for (auto [s, d] : list) ++deg[static_cast<std::size_t>(d)];
    t.in_begin.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) t.in_begin[i + 1] = t.in_begin[i] + deg[i];
    t.in_source.resize(static_cast<std::size_t>(t.in_begin[n]));
    t.in_type.resize(t.in_source.size());
    std::vector<int> fill(t.in_begin.begin(), t.in_begin.end() - 1);
    // Fixed order: by edge type, then by position in the type's list.
    for (int e = 0; e < kEdgeTypes; ++e)
      for (auto [s, d] : t.edges[e]) {
        const int slot = fill[d]++;
        t.in_source[slot] = s;
        t.in_type[slot] = static_cast<EdgeType>(e);
      }
    return t;
  }

  /// Forward edges only; reverse edges are derived.
  static Topology from_forward_edges(std::array<int, kNodeKinds> counts,
                                     const std::vector<std::pair<int, int>>& follows,
                                     const std::vector<std::pair<int, int>>& interacts,
                                     const std::vector<std::pair<int, int>>& believes) {
    std::array<std::vector<std::pair<int, int>>, kEdgeTypes> all;
    auto add = [&](EdgeType fwd, const std::vector<std::pair<int, int>>& list) {
      for (auto [s, d] : list) {
        all[static_cast<int>(fwd)].emplace_back(s, d);
        all[static_cast<int>(reverse(fwd))].emplace_back(d, s);
      }
    };
    add(EdgeType::Follows, follows);
    add(EdgeType::Interacts, interacts);
    add(EdgeType::Believes, believes);
    return from_edges(counts, all);
  }

  static Topology from_graph(const HeteroGraph& g) {
    const int nu = static_cast<int>(g.users.size()), nm = static_cast<int>(g.media.size());
    std::vector<std::pair<int, int>> follows, interacts, believes;
    for (const auto& [a, b] : g.follow)
      follows.emplace_back(static_cast<int>(*g.user_index(a)), static_cast<int>(*g.user_index(b)));
    for (const auto& [u, m] : g.interact)
      interacts.emplace_back(static_cast<int>(*g.user_index(u)), nu + static_cast<int>(*g.media_index(m)));
    for (const auto& [u, b] : g.belief_edges)
      believes.emplace_back(static_cast<int>(*g.user_index(u)), nu + nm + static_cast<int>(*g.belief_index(b)));
    return from_forward_edges({nu, nm, static_cast<int>(g.beliefs.size())}, follows, interacts, believes);
  }
};

/// Node index of a user or media id in Topology::from_graph numbering.
inline int user_node(const HeteroGraph& g, std::string_view id) {
  auto i = g.user_index(id);
  if (!i) throw DataError("unknown user node \"" + std::string(id) + "\"");
  return static_cast<int>(*i);
}

inline int media_node(const HeteroGraph& g, std::string_view id) {
  auto i = g.media_index(id);
  if (!i) throw DataError("unknown media node \"" + std::string(id) + "\"");
  return static_cast<int>(g.users.size() + *i);
}

/// Initial node states as a dim x nodes matrix in topology order.
template <typename S>
Matrix<S> assemble_features(const HeteroGraph& g, const EmbeddingTable& table) {
  const int n = static_cast<int>(g.users.size() + g.media.size() + g.beliefs.size());
  Matrix<S> h(table.dim, n);
  int col = 0;
  for (const auto& id : g.users) h.col(col++) = table.at(node_key(NodeKind::User, id)).template cast<S>();
  for (const auto& id : g.media) h.col(col++) = table.at(node_key(NodeKind::Media, id)).template cast<S>();
  for (Belief b : g.beliefs) h.col(col++) = table.at(node_key(NodeKind::Belief, to_string(b))).template cast<S>();
  return h;
}

// ---------------------------------------------------------------------------
// Parameters

template <typename S>
struct Linear {
  Matrix<S> weight;
  Vector<S> bias;
};

template <typename S>
struct LayerParams {
  std::array<Linear<S>, kNodeKinds> key, query, value, aggregate;
  std::array<std::vector<Matrix<S>>, kEdgeTypes> attention, message;  // per head, head_dim^2
  Vector<S> prior;                                                    // one per edge type
};

template <typename S>
struct HgtParams {
  std::vector<LayerParams<S>> layers;
  Linear<S> hidden;  // 2*dim -> dim
  Linear<S> output;  // dim -> 3 polarity + 4 intensity logits
};

template <typename S>
struct TensorView {
  std::string name;
  Eigen::Map<Matrix<S>> map;
};

/// Every parameter tensor with a stable name, in a fixed order.
template <typename S>
std::vector<TensorView<S>> tensors(HgtParams<S>& p) {
  std::vector<TensorView<S>> out;
  auto add_m = [&](std::string name, Matrix<S>& m) {
    out.push_back({std::move(name), Eigen::Map<Matrix<S>>(m.data(), m.rows(), m.cols())});
  };
  auto add_v = [&](std::string name, Vector<S>& v) {
    out.push_back({std::move(name), Eigen::Map<Matrix<S>>(v.data(), v.rows(), 1)});
  };
  auto add_lin = [&](const std::string& name, Linear<S>& lin) {
    add_m(name + ".weight", lin.weight);
    add_v(name + ".bias", lin.bias);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    for (int k = 0; k < kNodeKinds; ++k) {
      const std::string kind(to_string(static_cast<NodeKind>(k)));
      add_lin(pre + kind + ".key", layer.key[k]);
      add_lin(pre + kind + ".query", layer.query[k]);
      add_lin(pre + kind + ".value", layer.value[k]);
      add_lin(pre + kind + ".aggregate", layer.aggregate[k]);
    }
    for (int e = 0; e < kEdgeTypes; ++e) {
      const std::string rel(to_string(static_cast<EdgeType>(e)));
      for (std::size_t h = 0; h < layer.attention[e].size(); ++h) {
        add_m(pre + rel + ".attention.head" + std::to_string(h), layer.attention[e][h]);
        add_m(pre + rel + ".message.head" + std::to_string(h), layer.message[e][h]);
      }
    }
    add_v(pre + "prior", layer.prior);
  }
  add_lin("head.hidden", p.hidden);
  add_lin("head.output", p.output);
  return out;
}

/// Zero tensors shaped for `config`.
template <typename S>
HgtParams<S> zero_params(const HgtConfig& config) {
  config.validate();
  const int d = config.dim, dk = config.head_dim();
  auto lin = [](int out, int in) { return Linear<S>{Matrix<S>::Zero(out, in), Vector<S>::Zero(out)}; };
  HgtParams<S> p;
  p.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& layer : p.layers) {
    for (int k = 0; k < kNodeKinds; ++k) {
      layer.key[k] = lin(d, d);
      layer.query[k] = lin(d, d);
      layer.value[k] = lin(d, d);
      layer.aggregate[k] = lin(d, d);
    }
    for (int e = 0; e < kEdgeTypes; ++e) {
      layer.attention[e].assign(static_cast<std::size_t>(config.heads), Matrix<S>::Zero(dk, dk));
      layer.message[e].assign(static_cast<std::size_t>(config.heads), Matrix<S>::Zero(dk, dk));
    }
    layer.prior = Vector<S>::Zero(kEdgeTypes);
  }
  p.hidden = lin(d, 2 * d);
  p.output = lin(kOutputs, d);
  return p;
}

/// Xavier-uniform weights, zero biases, unit priors. Tensor i draws from the
/// splitmix64 stream keyed by (seed, i).
template <typename S>
HgtParams<S> init_params(const HgtConfig& config, std::uint64_t seed) {
  HgtParams<S> p = zero_params<S>(config);
  auto views = tensors(p);
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto& t = views[i].map;
    const std::string& name = views[i].name;
    if (name.ends_with(".prior")) {
      t.setOnes();
      continue;
    }
    if (t.cols() == 1) continue;  // bias
    SplitMix rng(mix_seed(seed, i));
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = static_cast<S>(rng.uniform(-bound, bound));
  }
  return p;
}

template <typename T, typename S>
HgtParams<T> cast_params(const HgtParams<S>& src) {
  auto lin = [](const Linear<S>& l) { return Linear<T>{l.weight.template cast<T>(), l.bias.template cast<T>()}; };
  HgtParams<T> out;
  for (const auto& layer : src.layers) {
    LayerParams<T> l;
    for (int k = 0; k < kNodeKinds; ++k) {
      l.key[k] = lin(layer.key[k]);
      l.query[k] = lin(layer.query[k]);
      l.value[k] = lin(layer.value[k]);
      l.aggregate[k] = lin(layer.aggregate[k]);
    }
    for (int e = 0; e < kEdgeTypes; ++e) {
      for (const auto& m : layer.attention[e]) l.attention[e].push_back(m.template cast<T>());
      for (const auto& m : layer.message[e]) l.message[e].push_back(m.template cast<T>());
    }
    l.prior = layer.prior.template cast<T>();
    out.layers.push_back(std::move(l));
  }
  out.hidden = lin(src.hidden);
  out.output = lin(src.output);
  return out;
}

// ---------------------------------------------------------------------------
// Forward

template <typename S>
struct LayerTrace {
  Matrix<S> input;
  Matrix<S> key, query, value;                    // dim x nodes
  std::array<Matrix<S>, kEdgeTypes> query_att;    // W_att q, dim x |target kind|
  std::array<Matrix<S>, kEdgeTypes> message;      // W_msg v, dim x |source kind|
  Matrix<S> dots;                                 // heads x edges, k . W_att q
  Matrix<S> attention;                            // heads x edges
  Matrix<S> aggregate;                            // dim x nodes, pre-activation
  Matrix<S> activated;                            // dim x nodes
  Matrix<S> mask;                                 // dim x nodes; empty in eval mode
  Matrix<S> output;
};

struct NodePair {
  int user = 0;
  int media = 0;
};

template <typename S>
struct ForwardTrace {
  std::vector<LayerTrace<S>> layers;
  Matrix<S> head_input;  // 2*dim x pairs
  Matrix<S> hidden_pre;
  Matrix<S> hidden;
  std::vector<NodePair> pairs;
  int nodes = 0;
};

template <typename S>
struct ForwardResult {
  Matrix<S> logits;  // 7 x pairs: rows 0-2 polarity, rows 3-6 intensity
  ForwardTrace<S> trace;
};

namespace detail {

template <typename S>
Matrix<S> activate(const Matrix<S>& x, Activation a) {
  if (a == Activation::Relu) return x.cwiseMax(S(0));
  return x.array().tanh().matrix();
}

// d activation / d input, given input and output.
template <typename S>
Matrix<S> activation_slope(const Matrix<S>& in, const Matrix<S>& out, Activation a) {
  if (a == Activation::Relu) return (in.array() > S(0)).template cast<S>().matrix();
  return (S(1) - out.array().square()).matrix();
}

template <typename S>
void require_finite(const Matrix<S>& m, int layer, const char* what) {
  if (!m.allFinite())
    throw NumericError("hgt layer " + std::to_string(layer) + ": non-finite " + what);
}

}  // namespace detail

/// One propagation layer. Targets with no incoming edge copy their input.
template <typename S>
LayerTrace<S> hgt_layer_forward(const Matrix<S>& input, const Topology& topo, const LayerParams<S>& p,
                                const HgtConfig& cfg, Mode mode, std::uint64_t dropout_seed,
                                int layer_index = 0) {
  const int d = cfg.dim, heads = cfg.heads, dk = cfg.head_dim(), n = topo.nodes();
  if (input.rows() != d || input.cols() != n) throw std::invalid_argument("hgt: input shape mismatch");
  LayerTrace<S> t;
  t.input = input;
  t.key.resize(d, n);
  t.query.resize(d, n);
  t.value.resize(d, n);
  for (int k = 0; k < kNodeKinds; ++k) {
    const int off = topo.offset[k], cnt = topo.count[k];
    if (cnt == 0) continue;
    const auto in = input.middleCols(off, cnt);
    t.key.middleCols(off, cnt).noalias() = p.key[k].weight * in;
    t.key.middleCols(off, cnt).colwise() += p.key[k].bias;
    t.query.middleCols(off, cnt).noalias() = p.query[k].weight * in;
    t.query.middleCols(off, cnt).colwise() += p.query[k].bias;
    t.value.middleCols(off, cnt).noalias() = p.value[k].weight * in;
    t.value.middleCols(off, cnt).colwise() += p.value[k].bias;
  }
  for (int e = 0; e < kEdgeTypes; ++e) {
    if (topo.edges[e].empty()) continue;
    const int a = static_cast<int>(source_kind(static_cast<EdgeType>(e)));
    const int b = static_cast<int>(target_kind(static_cast<EdgeType>(e)));
    t.query_att[e].resize(d, topo.count[b]);
    t.message[e].resize(d, topo.count[a]);
    for (int h = 0; h < heads; ++h) {
      t.query_att[e].middleRows(h * dk, dk).noalias() =
          p.attention[e][h] * t.query.block(h * dk, topo.offset[b], dk, topo.count[b]);
      t.message[e].middleRows(h * dk, dk).noalias() =
          p.message[e][h] * t.value.block(h * dk, topo.offset[a], dk, topo.count[a]);
    }
  }

  const int edges = topo.edge_count();
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  t.dots.resize(heads, edges);
  t.attention.resize(heads, edges);
  t.aggregate = Matrix<S>::Zero(d, n);
  for (int tgt = 0; tgt < n; ++tgt) {
    const int lo = topo.in_begin[tgt], hi = topo.in_begin[tgt + 1];
    if (lo == hi) continue;
    const int tgt_local = tgt - topo.offset[static_cast<int>(topo.kind_of(tgt))];
    for (int j = lo; j < hi; ++j) {
      const int e = static_cast<int>(topo.in_type[j]), src = topo.in_source[j];
      for (int h = 0; h < heads; ++h) {
        const S dot = t.key.col(src).segment(h * dk, dk).dot(t.query_att[e].col(tgt_local).segment(h * dk, dk));
        t.dots(h, j) = dot;
        t.attention(h, j) = dot * p.prior[e] * scale;
      }
    }
    for (int h = 0; h < heads; ++h) {
      auto scores = t.attention.row(h).segment(lo, hi - lo);
      const S top = scores.maxCoeff();
      scores = (scores.array() - top).exp().matrix();
      scores /= scores.sum();
    }
    for (int j = lo; j < hi; ++j) {
      const int e = static_cast<int>(topo.in_type[j]), src = topo.in_source[j];
      const int src_local = src - topo.offset[static_cast<int>(source_kind(topo.in_type[j]))];
      for (int h = 0; h < heads; ++h)
        t.aggregate.col(tgt).segment(h * dk, dk) += t.attention(h, j) * t.message[e].col(src_local).segment(h * dk, dk);
    }
  }
  detail::require_finite(t.attention, layer_index, "attention");
  t.activated = detail::activate(t.aggregate, cfg.activation);

  Matrix<S> dropped = t.activated;
  if (mode == Mode::Train && cfg.dropout > 0.0) {
    t.mask = Matrix<S>::Ones(d, n);
    SplitMix rng(mix_seed(dropout_seed, static_cast<std::uint64_t>(layer_index)));
    const S keep_scale = S(1) / static_cast<S>(1.0 - cfg.dropout);
    for (int col = 0; col < n; ++col) {
      if (topo.in_degree(col) == 0) continue;
      for (int r = 0; r < d; ++r) t.mask(r, col) = rng.uniform() < cfg.dropout ? S(0) : keep_scale;
    }
    dropped = dropped.cwiseProduct(t.mask);
  }

  t.output = input;
  for (int k = 0; k < kNodeKinds; ++k) {
    const int off = topo.offset[k], cnt = topo.count[k];
    if (cnt == 0) continue;
    Matrix<S> update = p.aggregate[k].weight * dropped.middleCols(off, cnt);
    update.colwise() += p.aggregate[k].bias;
    for (int c = 0; c < cnt; ++c)
      if (topo.in_degree(off + c) > 0) t.output.col(off + c) += update.col(c);
  }
  detail::require_finite(t.output, layer_index, "output");
  return t;
}

/// Runs every layer, then the classification head on each (user, media) pair.
template <typename S>
ForwardResult<S> model_forward(const Topology& topo, const Matrix<S>& features, const HgtParams<S>& params,
                               const HgtConfig& cfg, std::span<const NodePair> pairs, Mode mode,
                               std::uint64_t dropout_seed = 0) {
  cfg.validate();
  if (static_cast<int>(params.layers.size()) != cfg.layers)
    throw std::invalid_argument("hgt: parameter layer count does not match config");
  ForwardResult<S> r;
  r.trace.nodes = topo.nodes();
  r.trace.pairs.assign(pairs.begin(), pairs.end());
  const Matrix<S>* h = &features;
  for (int l = 0; l < cfg.layers; ++l) {
    r.trace.layers.push_back(hgt_layer_forward(*h, topo, params.layers[l], cfg, mode, dropout_seed, l));
    h = &r.trace.layers.back().output;
  }
  const int d = cfg.dim, np = static_cast<int>(pairs.size());
  r.trace.head_input.resize(2 * d, np);
  for (int j = 0; j < np; ++j) {
    const auto& pr = pairs[j];
    if (pr.user < topo.offset[0] || pr.user >= topo.offset[0] + topo.count[0] || pr.media < topo.offset[1] ||
        pr.media >= topo.offset[1] + topo.count[1])
      throw std::invalid_argument("hgt: pair references a missing node");
    r.trace.head_input.col(j).head(d) = h->col(pr.user);
    r.trace.head_input.col(j).tail(d) = h->col(pr.media);
  }
  r.trace.hidden_pre = params.hidden.weight * r.trace.head_input;
  r.trace.hidden_pre.colwise() += params.hidden.bias;
  r.trace.hidden = detail::activate(r.trace.hidden_pre, cfg.activation);
  r.logits = params.output.weight * r.trace.hidden;
  r.logits.colwise() += params.output.bias;
  detail::require_finite(r.logits, cfg.layers, "logits");
  return r;
}

// ---------------------------------------------------------------------------
// Backward

/// Accumulates parameter gradients of one layer into `grads` and returns the
/// gradient with respect to the layer input.
template <typename S>
Matrix<S> hgt_layer_backward(const LayerTrace<S>& t, const Topology& topo, const LayerParams<S>& p,
                             const HgtConfig& cfg, const Matrix<S>& grad_out, LayerParams<S>& g) {
  const int d = cfg.dim, heads = cfg.heads, dk = cfg.head_dim(), n = topo.nodes();
  Matrix<S> grad_in = grad_out;  // residual path

  const bool has_mask = t.mask.size() > 0;
  const Matrix<S> dropped = has_mask ? Matrix<S>(t.activated.cwiseProduct(t.mask)) : t.activated;
  Matrix<S> d_dropped = Matrix<S>::Zero(d, n);
  for (int k = 0; k < kNodeKinds; ++k) {
    const int off = topo.offset[k], cnt = topo.count[k];
    if (cnt == 0) continue;
    Matrix<S> go = grad_out.middleCols(off, cnt);
    for (int c = 0; c < cnt; ++c)
      if (topo.in_degree(off + c) == 0) go.col(c).setZero();
    g.aggregate[k].weight.noalias() += go * dropped.middleCols(off, cnt).transpose();
    g.aggregate[k].bias += go.rowwise().sum();
    d_dropped.middleCols(off, cnt).noalias() = p.aggregate[k].weight.transpose() * go;
  }
  Matrix<S> d_pre = has_mask ? Matrix<S>(d_dropped.cwiseProduct(t.mask)) : d_dropped;
  d_pre = d_pre.cwiseProduct(detail::activation_slope(t.aggregate, t.activated, cfg.activation));

  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  Matrix<S> d_key = Matrix<S>::Zero(d, n);
  std::array<Matrix<S>, kEdgeTypes> d_query_att, d_message;
  for (int e = 0; e < kEdgeTypes; ++e) {
    if (topo.edges[e].empty()) continue;
    d_query_att[e] = Matrix<S>::Zero(d, t.query_att[e].cols());
    d_message[e] = Matrix<S>::Zero(d, t.message[e].cols());
  }
  std::vector<S> d_weight;
  for (int tgt = 0; tgt < n; ++tgt) {
    const int lo = topo.in_begin[tgt], hi = topo.in_begin[tgt + 1];
    if (lo == hi) continue;
    const int tgt_local = tgt - topo.offset[static_cast<int>(topo.kind_of(tgt))];
    d_weight.assign(static_cast<std::size_t>((hi - lo) * heads), S(0));
    for (int j = lo; j < hi; ++j) {
      const int e = static_cast<int>(topo.in_type[j]), src = topo.in_source[j];
      const int src_local = src - topo.offset[static_cast<int>(source_kind(topo.in_type[j]))];
      for (int h = 0; h < heads; ++h) {
        const auto up = d_pre.col(tgt).segment(h * dk, dk);
        d_weight[(j - lo) * heads + h] = up.dot(t.message[e].col(src_local).segment(h * dk, dk));
        d_message[e].col(src_local).segment(h * dk, dk) += t.attention(h, j) * up;
      }
    }
    for (int h = 0; h < heads; ++h) {
      S mean = 0;
      for (int j = lo; j < hi; ++j) mean += t.attention(h, j) * d_weight[(j - lo) * heads + h];
      for (int j = lo; j < hi; ++j) {
        const int e = static_cast<int>(topo.in_type[j]), src = topo.in_source[j];
        const S d_score = t.attention(h, j) * (d_weight[(j - lo) * heads + h] - mean);
        g.prior[e] += d_score * t.dots(h, j) * scale;
        const S d_dot = d_score * p.prior[e] * scale;
        d_key.col(src).segment(h * dk, dk) += d_dot * t.query_att[e].col(tgt_local).segment(h * dk, dk);
        d_query_att[e].col(tgt_local).segment(h * dk, dk) += d_dot * t.key.col(src).segment(h * dk, dk);
      }
    }
  }

  Matrix<S> d_query = Matrix<S>::Zero(d, n), d_value = Matrix<S>::Zero(d, n);
  for (int e = 0; e < kEdgeTypes; ++e) {
    if (topo.edges[e].empty()) continue;
    const int a = static_cast<int>(source_kind(static_cast<EdgeType>(e)));
    const int b = static_cast<int>(target_kind(static_cast<EdgeType>(e)));
    for (int h = 0; h < heads; ++h) {
      const auto q = t.query.block(h * dk, topo.offset[b], dk, topo.count[b]);
      const auto dq_att = d_query_att[e].middleRows(h * dk, dk);
      g.attention[e][h].noalias() += dq_att * q.transpose();
      d_query.block(h * dk, topo.offset[b], dk, topo.count[b]).noalias() += p.attention[e][h].transpose() * dq_att;

      const auto v = t.value.block(h * dk, topo.offset[a], dk, topo.count[a]);
      const auto dm = d_message[e].middleRows(h * dk, dk);
      g.message[e][h].noalias() += dm * v.transpose();
      d_value.block(h * dk, topo.offset[a], dk, topo.count[a]).noalias() += p.message[e][h].transpose() * dm;
    }
  }

  for (int k = 0; k < kNodeKinds; ++k) {
    const int off = topo.offset[k], cnt = topo.count[k];
    if (cnt == 0) continue;
    const auto in = t.input.middleCols(off, cnt);
    auto push = [&](const Matrix<S>& d_out, const Linear<S>& lin, Linear<S>& glin) {
      const auto block = d_out.middleCols(off, cnt);
      glin.weight.noalias() += block * in.transpose();
      glin.bias += block.rowwise().sum();
      grad_in.middleCols(off, cnt).noalias() += lin.weight.transpose() * block;
    };
    push(d_key, p.key[k], g.key[k]);
    push(d_query, p.query[k], g.query[k]);
    push(d_value, p.value[k], g.value[k]);
  }
  return grad_in;
}

/// Gradients of every parameter given d loss / d logits (7 x pairs).
template <typename S>
HgtParams<S> backward(const ForwardTrace<S>& trace, const Topology& topo, const HgtParams<S>& params,
                      const HgtConfig& cfg, const Matrix<S>& d_logits) {
  if (trace.layers.size() != params.layers.size() || static_cast<int>(trace.layers.size()) != cfg.layers ||
      trace.nodes != topo.nodes())
    throw std::invalid_argument("hgt backward: trace does not match parameters or topology");
  if (d_logits.rows() != kOutputs || d_logits.cols() != static_cast<Eigen::Index>(trace.pairs.size()))
    throw std::invalid_argument("hgt backward: loss gradient has the wrong shape");
  const int d = cfg.dim;
  HgtParams<S> g = zero_params<S>(cfg);

  g.output.weight.noalias() = d_logits * trace.hidden.transpose();
  g.output.bias = d_logits.rowwise().sum();
  Matrix<S> d_hidden = params.output.weight.transpose() * d_logits;
  d_hidden = d_hidden.cwiseProduct(detail::activation_slope(trace.hidden_pre, trace.hidden, cfg.activation));
  g.hidden.weight.noalias() = d_hidden * trace.head_input.transpose();
  g.hidden.bias = d_hidden.rowwise().sum();
  const Matrix<S> d_input = params.hidden.weight.transpose() * d_hidden;

  Matrix<S> d_states = Matrix<S>::Zero(d, topo.nodes());
  for (std::size_t j = 0; j < trace.pairs.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    d_states.col(trace.pairs[j].user) += d_input.col(col).head(d);
    d_states.col(trace.pairs[j].media) += d_input.col(col).tail(d);
  }
  for (int l = cfg.layers - 1; l >= 0; --l)
    d_states = hgt_layer_backward(trace.layers[l], topo, params.layers[l], cfg, d_states, g.layers[l]);
  return g;
}

}  // namespace beliefcast::hgt
