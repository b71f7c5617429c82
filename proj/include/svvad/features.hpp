#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "svvad/audio.hpp"

namespace svvad {

struct MelConfig {
  double win_s = 0.025;
  double hop_s = 0.010;
  size_t n_mels = 40;
  double fmin_hz = 20.0;
  double fmax_hz = 7600.0;
  double log_floor = 1e-10;
  bool cmvn = false;  // optional per-utterance mean/variance normalization

  size_t win_samples(int sample_rate) const;
  size_t hop_samples(int sample_rate) const;
  // floor((n - win) / hop) + 1; the frame count contract shared with the
  // label machinery.
  size_t frame_count(size_t n_samples, int sample_rate) const;
};

// T x F log-mel frames, row-major.
struct FeatureMatrix {
  size_t T = 0;
  size_t F = 0;
  std::vector<double> values;
  double hop_s = 0.0;
  double win_s = 0.0;

  double at(size_t t, size_t f) const { return values[t * F + f]; }
  double& at(size_t t, size_t f) { return values[t * F + f]; }
};

// Center frequencies (Hz) of the triangular mel filters for a config.
std::vector<double> mel_filter_centers_hz(const MelConfig& cfg,
                                          int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed STFT power spectrum -> triangular mel filterbank -> log with
// floor. Throws if the audio is shorter than one window.
FeatureMatrix logmel(const AudioBuffer& audio, const MelConfig& cfg);

void write_features_csv(const std::string& path, const FeatureMatrix& feats);

}  // namespace svvad
