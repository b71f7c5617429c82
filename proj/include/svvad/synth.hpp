#pragma once

#include <cstdint>
#include <vector>

#include "svvad/audio.hpp"

namespace svvad {

// Parametric stand-in for a real speaker: a harmonic source at f0 shaped by
// formant resonators, with a slow amplitude envelope. Distinct profiles give
// distinct spectral envelopes, which is what the speaker encoder pools.
struct Formant {
  double freq_hz;
  double bandwidth_hz;
};

struct SpeakerProfile {
  int id = 0;
  double f0_hz = 0.0;  // in [80, 300]
  std::vector<Formant> formants;  // 2-3 resonances in [300, 3500]
  double am_rate_hz = 0.0;  // slow envelope rate
};

AudioBuffer synth_utterance(const SpeakerProfile& profile, double duration_s,
                            uint64_t seed, int sample_rate = 16000);

// Seeded white noise shaped by a first-order lowpass.
AudioBuffer make_noise(double duration_s, uint64_t seed,
                       int sample_rate = 16000);

AudioBuffer make_silence(double duration_s, int sample_rate = 16000);

// output = speech + g * noise with g chosen so the speech/noise power ratio
// equals snr_db; the noise is tiled if shorter. Peak-renormalized.
AudioBuffer mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise,
                       double snr_db);

// Convolution with a synthetic impulse response: unit direct path plus an
// exponentially decaying noise tail whose -60 dB point lands at rt60.
// Output is trimmed to the input length and peak-renormalized.
AudioBuffer apply_reverb(const AudioBuffer& speech, double rt60_s,
                         uint64_t seed);

// Deterministic bank of synthetic speakers. Utterances are synthesized on
// demand; the same (speaker, duration, seed) always yields the same buffer.
class SpeakerCorpus {
 public:
  SpeakerCorpus(size_t n_speakers, uint64_t seed, int sample_rate = 16000);

  size_t size() const { return profiles_.size(); }
  const SpeakerProfile& profile(size_t i) const { return profiles_.at(i); }
  int sample_rate() const { return sample_rate_; }
  uint64_t seed() const { return seed_; }

  AudioBuffer utterance(size_t speaker, double duration_s,
                        uint64_t seed) const;

 private:
  std::vector<SpeakerProfile> profiles_;
  uint64_t seed_;
  int sample_rate_;
};

}  // namespace svvad
