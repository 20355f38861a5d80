#include "lesionsynth/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace lesionsynth {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'C', 'K', 'P', 'T', '1', '\0'};

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
int64_t read_i64(std::istream& is) {
  int64_t v;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::istream& is) {
  uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

}  // namespace

const Tensorf* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + tmp);
    os.write(kMagic, sizeof(kMagic));
    write_str(os, ckpt.kind);
    write_str(os, ckpt.fingerprint);
    write_str(os, ckpt.meta);
    write_i64(os, ckpt.epoch);
    write_i64(os, ckpt.g_steps);
    write_i64(os, ckpt.d_steps);
    write_u32(os, static_cast<uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, t] : ckpt.arrays) {
      write_str(os, name);
      write_u32(os, static_cast<uint32_t>(t.ndim()));
      for (int d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("not a checkpoint file: " + path);

  Checkpoint ckpt;
  ckpt.kind = read_str(is);
  ckpt.fingerprint = read_str(is);
  ckpt.meta = read_str(is);
  ckpt.epoch = read_i64(is);
  ckpt.g_steps = read_i64(is);
  ckpt.d_steps = read_i64(is);
  uint32_t n = read_u32(is);
  ckpt.arrays.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = read_str(is);
    uint32_t ndim = read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(is));
    Tensorf t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    ckpt.arrays.emplace_back(std::move(name), std::move(t));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return ckpt;
}

}  // namespace lesionsynth
