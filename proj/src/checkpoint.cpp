#include "svvad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace svvad {

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ofstream& f, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<char*>(b), 8);
}

uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<TensorBlob>& blobs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("svvad: cannot open for write: " + path);
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(f, kCheckpointVersion);
  put_u32(f, static_cast<uint32_t>(blobs.size()));
  for (const TensorBlob& b : blobs) {
    put_u32(f, static_cast<uint32_t>(b.name.size()));
    f.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(f, 2);  // rank
    put_u64(f, b.rows);
    put_u64(f, b.cols);
    // IEEE-754 doubles, host little-endian.
    f.write(reinterpret_cast<const char*>(b.values.data()),
            static_cast<std::streamsize>(b.values.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("svvad: short write to " + path);
}

std::vector<TensorBlob> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("svvad: cannot open for read: " + path);
  char magic[sizeof(kCheckpointMagic)];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("svvad: not a checkpoint file: " + path);
  const uint32_t version = get_u32(f);
  if (version != kCheckpointVersion)
    throw std::runtime_error("svvad: checkpoint version " +
                             std::to_string(version) + " unsupported (want " +
                             std::to_string(kCheckpointVersion) + "): " + path);
  const uint32_t count = get_u32(f);
  std::vector<TensorBlob> blobs(count);
  for (uint32_t i = 0; i < count; ++i) {
    TensorBlob& b = blobs[i];
    const uint32_t name_len = get_u32(f);
    b.name.resize(name_len);
    f.read(b.name.data(), name_len);
    const uint32_t rank = get_u32(f);
    if (rank != 2)
      throw std::runtime_error("svvad: unexpected tensor rank in " + path);
    b.rows = get_u64(f);
    b.cols = get_u64(f);
    b.values.resize(b.rows * b.cols);
    f.read(reinterpret_cast<char*>(b.values.data()),
           static_cast<std::streamsize>(b.values.size() * sizeof(double)));
    if (!f) throw std::runtime_error("svvad: truncated checkpoint: " + path);
  }
  return blobs;
}

std::vector<TensorBlob> store_blobs(const ParameterStore& params) {
  std::vector<TensorBlob> blobs;
  for (const Parameter& p : params.parameters()) {
    TensorBlob b;
    b.name = p.name;
    b.rows = p.tensor.rows();
    b.cols = p.tensor.cols();
    b.values = p.tensor.values();
    blobs.push_back(std::move(b));
  }
  return blobs;
}

void load_store_blobs(ParameterStore& params,
                      const std::vector<TensorBlob>& blobs) {
  for (const Parameter& p : params.parameters()) {
    const TensorBlob* found = nullptr;
    for (const TensorBlob& b : blobs)
      if (b.name == p.name) {
        found = &b;
        break;
      }
    if (found == nullptr)
      throw std::runtime_error("svvad: checkpoint is missing parameter " +
                               p.name);
    if (found->rows != p.tensor.rows() || found->cols != p.tensor.cols())
      throw std::runtime_error("svvad: checkpoint shape mismatch for " +
                               p.name);
    Tensor t = p.tensor;
    t.mutable_values() = found->values;
  }
}

void write_metadata(const std::string& checkpoint_path,
                    const std::string& json_text) {
  const std::string path = checkpoint_path + ".meta.json";
  std::ofstream f(path);
  if (!f) throw std::runtime_error("svvad: cannot open for write: " + path);
  f << json_text;
}

std::string read_metadata(const std::string& checkpoint_path) {
  const std::string path = checkpoint_path + ".meta.json";
  std::ifstream f(path);
  if (!f) throw std::runtime_error("svvad: cannot open for read: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace svvad
