#include "beliefcast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace beliefcast::hgt {

namespace {

static_assert(std::endian::native == std::endian::little);

constexpr char kMagic[4] = {'S', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw CheckpointError("checkpoint: truncated");
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  ckpt.config.validate();
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config.layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config.heads));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config.dim));
  put<double>(out, ckpt.config.dropout);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.config.activation));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.task));
  auto views = tensors(const_cast<HgtParams<float>&>(ckpt.params));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(views.size()));
  for (const auto& t : views) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.map.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.map.cols()));
    out.write(reinterpret_cast<const char*>(t.map.data()), static_cast<std::streamsize>(sizeof(float) * t.map.size()));
  }
  if (!out) throw CheckpointError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("checkpoint: bad magic");
  if (get<std::uint32_t>(in) != kVersion) throw CheckpointError("checkpoint: unsupported version");
  Checkpoint ckpt;
  ckpt.config.layers = static_cast<int>(get<std::uint32_t>(in));
  ckpt.config.heads = static_cast<int>(get<std::uint32_t>(in));
  ckpt.config.dim = static_cast<int>(get<std::uint32_t>(in));
  ckpt.config.dropout = get<double>(in);
  const auto act = get<std::uint8_t>(in);
  const auto task = get<std::uint8_t>(in);
  if (act > 1 || task > 2) throw CheckpointError("checkpoint: bad config echo");
  ckpt.config.activation = static_cast<Activation>(act);
  ckpt.task = static_cast<Task>(task);
  try {
    ckpt.config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  ckpt.params = zero_params<float>(ckpt.config);
  auto views = tensors(ckpt.params);
  if (get<std::uint32_t>(in) != views.size()) throw CheckpointError("checkpoint: tensor count does not match config");
  for (auto& t : views) {
    const auto len = get<std::uint16_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("checkpoint: truncated");
    if (name != t.name) throw CheckpointError("checkpoint: expected tensor " + t.name + ", found " + name);
    const auto rows = get<std::uint32_t>(in), cols = get<std::uint32_t>(in);
    if (rows != t.map.rows() || cols != t.map.cols()) throw CheckpointError("checkpoint: shape mismatch for " + name);
    if (!in.read(reinterpret_cast<char*>(t.map.data()), static_cast<std::streamsize>(sizeof(float) * t.map.size())))
      throw CheckpointError("checkpoint: truncated tensor " + name);
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace beliefcast::hgt
