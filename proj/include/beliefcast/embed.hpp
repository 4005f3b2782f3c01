#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "beliefcast/datamodel.hpp"
#include "beliefcast/graph.hpp"

namespace beliefcast {

using Embedding = Eigen::VectorXf;

inline constexpr int kDefaultDim = 128;

/// Lowercases ASCII letters and splits on runs of characters that are not
/// ASCII letters or digits. Bytes >= 0x80 count as word characters so UTF-8
/// words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing: every token adds +-1 at FNV-1a(token) mod dim, the
/// sign taken from the hash's top bit, and the sum is L2-normalized. The
/// normalization is done in double and rounded once to float.
Embedding hash_featurize(std::string_view text, int dim);

/// Components i.i.d. uniform on [-1/sqrt(dim), 1/sqrt(dim)], drawn from a
/// splitmix64 stream keyed by (seed, stream).
Embedding seeded_random_vector(std::uint64_t seed, std::uint64_t stream, int dim);

/// Random vector for a node key such as "user:u1"; the stream is FNV-1a(key).
Embedding seeded_node_vector(std::uint64_t seed, std::string_view node_key, int dim);

/// One vector per vocabulary belief, stream = belief index.
std::vector<Embedding> init_belief_embeddings(std::uint64_t seed, int dim);

/// "user:<id>", "media:<id>" or "belief:<name>".
std::string node_key(NodeKind kind, std::string_view id);

class EmbedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Turns node text into a vector. `node_key` identifies the node for
/// providers that look vectors up instead of computing them.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual Embedding encode(std::string_view node_key, std::string_view text) const = 0;
  /// False for providers that ignore `text`; ablations that rewrite the text
  /// then have no effect.
  virtual bool uses_text() const { return true; }
};

class HashProvider : public EmbeddingProvider {
 public:
  explicit HashProvider(int dim = kDefaultDim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Embedding encode(std::string_view, std::string_view text) const override {
    return hash_featurize(text, dim_);
  }

 private:
  int dim_;
};

class RandomProvider : public EmbeddingProvider {
 public:
  RandomProvider(std::uint64_t seed, int dim = kDefaultDim) : seed_(seed), dim_(dim) {}
  int dim() const override { return dim_; }
  Embedding encode(std::string_view key, std::string_view) const override {
    return seeded_node_vector(seed_, key, dim_);
  }
  bool uses_text() const override { return false; }

 private:
  std::uint64_t seed_;
  int dim_;
};

/// Node vectors keyed by node_key().
struct EmbeddingTable {
  int dim = kDefaultDim;
  std::map<std::string, Embedding> vectors;

  const Embedding& at(std::string_view key) const;
  bool contains(std::string_view key) const { return vectors.count(std::string(key)) > 0; }
  std::size_t size() const { return vectors.size(); }
  bool operator==(const EmbeddingTable& other) const;
};

/// Serves vectors computed elsewhere, e.g. by a pretrained text encoder.
class FileProvider : public EmbeddingProvider {
 public:
  explicit FileProvider(EmbeddingTable table) : table_(std::move(table)) {}
  int dim() const override { return table_.dim; }
  Embedding encode(std::string_view key, std::string_view) const override;
  bool uses_text() const override { return false; }

 private:
  EmbeddingTable table_;
};

/// Encodes profile + "\n" + newline-joined history. The ablation flags drop
/// either part; dropping both yields the node's seeded random vector.
Embedding init_user_embedding(const UserRecord& user, const EmbeddingProvider& provider,
                              const AblationOptions& ablation, std::uint64_t seed);
Embedding init_media_embedding(const NewsItem& news, const EmbeddingProvider& provider);

/// Vectors for every node of `graph`. With `ablation.random_init` user and
/// media vectors are seeded random like the belief vectors.
EmbeddingTable build_table(const HeteroGraph& graph, const Dataset& dataset,
                           const EmbeddingProvider& provider, const AblationOptions& ablation,
                           std::uint64_t seed);

/// embeddings.bin: "SSEB", u32 version, u32 dim, u64 count, then per record a
/// u16 key length, key bytes and dim little-endian floats. Records are written
/// in key order.
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& in);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

}  // namespace beliefcast
