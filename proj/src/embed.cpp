#include "beliefcast/embed.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "beliefcast/random.hpp"

namespace beliefcast {

namespace {

static_assert(std::endian::native == std::endian::little,
              "embeddings.bin and checkpoints are read and written as little-endian");

constexpr char kMagic[4] = {'S', 'S', 'E', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw EmbedError("embeddings.bin: truncated");
  return value;
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Embedding hash_featurize(std::string_view text, int dim) {
  if (dim < 1) throw EmbedError("hash_featurize: dim must be positive");
  std::vector<double> acc(static_cast<std::size_t>(dim), 0.0);
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = fnv1a64(tok);
    acc[h % static_cast<std::uint64_t>(dim)] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm2 = 0.0;
  for (double v : acc) norm2 += v * v;
  Embedding out = Embedding::Zero(dim);
  if (norm2 == 0.0) return out;
  const double norm = std::sqrt(norm2);
  for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[static_cast<std::size_t>(i)] / norm);
  return out;
}

Embedding seeded_random_vector(std::uint64_t seed, std::uint64_t stream, int dim) {
  SplitMix rng(mix_seed(seed, stream));
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  Embedding out(dim);
  for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(rng.uniform(-bound, bound));
  return out;
}

Embedding seeded_node_vector(std::uint64_t seed, std::string_view node_key, int dim) {
  return seeded_random_vector(seed, fnv1a64(node_key), dim);
}

std::vector<Embedding> init_belief_embeddings(std::uint64_t seed, int dim) {
  if (dim < 1) throw EmbedError("init_belief_embeddings: dim must be positive");
  std::vector<Embedding> out;
  out.reserve(kBeliefCount);
  for (int i = 0; i < kBeliefCount; ++i) out.push_back(seeded_random_vector(seed, static_cast<std::uint64_t>(i), dim));
  return out;
}

std::string node_key(NodeKind kind, std::string_view id) {
  return std::string(to_string(kind)) + ":" + std::string(id);
}

const Embedding& EmbeddingTable::at(std::string_view key) const {
  auto it = vectors.find(std::string(key));
  if (it == vectors.end()) throw EmbedError("no embedding for node \"" + std::string(key) + "\"");
  return it->second;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  if (dim != other.dim || vectors.size() != other.vectors.size()) return false;
  auto a = vectors.begin();
  auto b = other.vectors.begin();
  for (; a != vectors.end(); ++a, ++b)
    if (a->first != b->first || a->second.size() != b->second.size() ||
        std::memcmp(a->second.data(), b->second.data(), sizeof(float) * a->second.size()) != 0)
      return false;
  return true;
}

Embedding FileProvider::encode(std::string_view key, std::string_view) const {
  auto it = table_.vectors.find(std::string(key));
  if (it == table_.vectors.end()) {
    const auto colon = key.find(':');
    const auto id = colon == std::string_view::npos ? key : key.substr(colon + 1);
    throw EmbedError("embedding file has no vector for \"" + std::string(id) + "\" (" + std::string(key) + ")");
  }
  return it->second;
}

Embedding init_user_embedding(const UserRecord& user, const EmbeddingProvider& provider,
                              const AblationOptions& ablation, std::uint64_t seed) {
  const std::string key = node_key(NodeKind::User, user.id);
  if (ablation.without_profile && ablation.without_history)
    return seeded_node_vector(seed, key, provider.dim());
  std::string text;
  if (!ablation.without_profile) text = user.profile;
  text += '\n';
  if (!ablation.without_history) {
    for (std::size_t i = 0; i < user.history.size(); ++i) {
      if (i) text += '\n';
      text += user.history[i];
    }
  }
  return provider.encode(key, text);
}

Embedding init_media_embedding(const NewsItem& news, const EmbeddingProvider& provider) {
  return provider.encode(node_key(NodeKind::Media, news.id), news.headline);
}

EmbeddingTable build_table(const HeteroGraph& graph, const Dataset& dataset,
                           const EmbeddingProvider& provider, const AblationOptions& ablation,
                           std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = provider.dim();
  const int dim = table.dim;
  auto check = [&](const std::string& key, Embedding v) {
    if (v.size() != dim) throw EmbedError("provider returned a vector of the wrong size for " + key);
    if (!v.allFinite()) throw EmbedError("non-finite embedding for " + key);
    table.vectors.emplace(key, std::move(v));
  };

  for (const auto& id : graph.users) {
    const std::string key = node_key(NodeKind::User, id);
    if (ablation.random_init) {
      check(key, seeded_node_vector(seed, key, dim));
      continue;
    }
    const UserRecord* u = dataset.find_user(id);
    if (!u) throw EmbedError("graph user \"" + id + "\" missing from dataset");
    check(key, init_user_embedding(*u, provider, ablation, seed));
  }
  for (const auto& id : graph.media) {
    const std::string key = node_key(NodeKind::Media, id);
    if (ablation.random_init) {
      check(key, seeded_node_vector(seed, key, dim));
      continue;
    }
    const NewsItem* n = dataset.find_news(id);
    if (!n) throw EmbedError("graph media \"" + id + "\" missing from dataset");
    check(key, init_media_embedding(*n, provider));
  }
  const auto belief_vectors = init_belief_embeddings(seed, dim);
  for (Belief b : graph.beliefs)
    check(node_key(NodeKind::Belief, to_string(b)), belief_vectors[static_cast<std::size_t>(b)]);
  return table;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim));
  put<std::uint64_t>(out, table.vectors.size());
  for (const auto& [key, v] : table.vectors) {
    if (key.size() > 0xffff) throw EmbedError("embedding key too long: " + key);
    if (v.size() != table.dim) throw EmbedError("embedding of wrong size for " + key);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(float) * v.size()));
  }
}

EmbeddingTable read_embeddings(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw EmbedError("embeddings.bin: bad magic");
  if (get<std::uint32_t>(in) != kVersion) throw EmbedError("embeddings.bin: unsupported version");
  EmbeddingTable table;
  table.dim = static_cast<int>(get<std::uint32_t>(in));
  if (table.dim < 1) throw EmbedError("embeddings.bin: dim must be positive");
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(in);
    std::string key(len, '\0');
    if (!in.read(key.data(), len)) throw EmbedError("embeddings.bin: truncated key");
    Embedding v(table.dim);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(float) * table.dim)))
      throw EmbedError("embeddings.bin: truncated vector for " + key);
    if (!table.vectors.emplace(std::move(key), std::move(v)).second)
      throw EmbedError("embeddings.bin: duplicate key");
  }
  return table;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbedError("cannot write " + path.string());
  write_embeddings(out, table);
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbedError("cannot open " + path.string());
  return read_embeddings(in);
}

}  // namespace beliefcast
