#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lesionsynth/tensor.hpp"

namespace lesionsynth {

// Binary parameter container: header (kind, config fingerprint, config text,
// epoch, optimizer step counters) plus an ordered list of named float32
// arrays, little-endian. Save/load round-trips byte-identically.
struct Checkpoint {
  std::string kind;         // "pix2pixhd", "pgan", ...
  std::string fingerprint;  // hash of the owning config
  std::string meta;         // serialized config, enough to rebuild the nets
  int64_t epoch = 0;
  int64_t g_steps = 0;
  int64_t d_steps = 0;
  std::vector<std::pair<std::string, Tensorf>> arrays;

  void add(std::string name, Tensorf t) { arrays.emplace_back(std::move(name), std::move(t)); }
  const Tensorf* find(const std::string& name) const;
};

// Atomic write (temp file + rename).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lesionsynth
