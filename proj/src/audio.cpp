#include "svvad/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace svvad {

void peak_normalize(AudioBuffer& audio, double peak) {
  double mx = 0.0;
  for (double s : audio.samples) mx = std::max(mx, std::fabs(s));
  if (mx <= 0.0) return;
  double g = peak / mx;
  for (double& s : audio.samples) s *= g;
}

double mean_power(const AudioBuffer& audio) {
  if (audio.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : audio.samples) acc += s * s;
  return acc / static_cast<double>(audio.samples.size());
}

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void put_u16(std::ofstream& f, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  f.write(reinterpret_cast<char*>(b), 2);
}

uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t get_u16(std::ifstream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const AudioBuffer& audio) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("svvad: cannot open for write: " + path);
  const uint32_t n = static_cast<uint32_t>(audio.samples.size());
  const uint32_t data_bytes = n * 2;
  f.write("RIFF", 4);
  put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(f, 16);
  put_u16(f, 1);  // PCM
  put_u16(f, 1);  // mono
  put_u32(f, static_cast<uint32_t>(audio.sample_rate));
  put_u32(f, static_cast<uint32_t>(audio.sample_rate * 2));
  put_u16(f, 2);
  put_u16(f, 16);
  f.write("data", 4);
  put_u32(f, data_bytes);
  for (double s : audio.samples) {
    double clamped = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<int16_t>(std::lrint(clamped * 32767.0));
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    f.write(reinterpret_cast<char*>(b), 2);
  }
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("svvad: cannot open for read: " + path);
  char tag[5] = {0};
  f.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("svvad: not a RIFF file: " + path);
  get_u32(f);
  f.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("svvad: not a WAVE file: " + path);

  AudioBuffer out;
  uint16_t channels = 1;
  while (f.read(tag, 4)) {
    uint32_t chunk = get_u32(f);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      uint16_t fmt = get_u16(f);
      channels = get_u16(f);
      out.sample_rate = static_cast<int>(get_u32(f));
      get_u32(f);
      get_u16(f);
      uint16_t bits = get_u16(f);
      if (fmt != 1 || bits != 16 || channels != 1)
        throw std::runtime_error("svvad: only PCM16 mono supported: " + path);
      if (chunk > 16) f.seekg(chunk - 16, std::ios::cur);
    } else if (std::strncmp(tag, "data", 4) == 0) {
      size_t n = chunk / 2;
      out.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        unsigned char b[2];
        f.read(reinterpret_cast<char*>(b), 2);
        auto v = static_cast<int16_t>(b[0] | (b[1] << 8));
        out.samples[i] = std::clamp(static_cast<double>(v) / 32767.0, -1.0, 1.0);
      }
      return out;
    } else {
      f.seekg(chunk, std::ios::cur);
    }
  }
  throw std::runtime_error("svvad: no data chunk in " + path);
}

}  // namespace svvad
