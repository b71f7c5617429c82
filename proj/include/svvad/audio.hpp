#pragma once

#include <string>
#include <vector>

namespace svvad {

// Mono PCM signal. Samples are doubles in [-1, 1] once peak-normalized.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Scales so that max |sample| == peak. Silence is left untouched.
void peak_normalize(AudioBuffer& audio, double peak = 0.95);

double mean_power(const AudioBuffer& audio);

// PCM16 mono little-endian.
void write_wav(const std::string& path, const AudioBuffer& audio);
AudioBuffer read_wav(const std::string& path);

}  // namespace svvad
