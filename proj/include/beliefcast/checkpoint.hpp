#pragma once

#include <filesystem>
#include <iosfwd>

#include "beliefcast/hgt.hpp"
#include "beliefcast/loss.hpp"

namespace beliefcast::hgt {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  HgtConfig config;
  Task task = Task::Joint;
  HgtParams<float> params;
};

/// "SSCK", u32 version, config (u32 layers, heads, dim, f64 dropout,
/// u8 activation, u8 task), u32 tensor count, then per tensor a u16 name
/// length, the name, u32 rows, u32 cols and rows*cols little-endian floats in
/// column-major order.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace beliefcast::hgt
