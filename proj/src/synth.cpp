#include "svvad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "svvad/dsp.hpp"
#include "svvad/rng.hpp"

namespace svvad {

namespace {

// Two-pole resonator, applied in place.
void resonate(std::vector<double>& x, double freq_hz, double bw_hz, int sr) {
  const double r = std::exp(-M_PI * bw_hz / sr);
  const double w = 2.0 * M_PI * freq_hz / sr;
  const double a1 = 2.0 * r * std::cos(w);
  const double a2 = -r * r;
  const double b0 = 1.0 - r;
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = b0 * v + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

AudioBuffer synth_utterance(const SpeakerProfile& profile, double duration_s,
                            uint64_t seed, int sample_rate) {
  if (duration_s <= 0.0)
    throw std::invalid_argument("svvad: utterance duration must be positive");
  const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  Rng rng(mix_seed(seed, static_cast<uint64_t>(profile.id)));

  const double vib_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double am_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double f0_jitter = rng.uniform(-0.015, 0.015);

  // Glottal impulse train with mild vibrato plus low-level aspiration noise.
  std::vector<double> x(n, 0.0);
  double phase = rng.uniform();
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 = profile.f0_hz * (1.0 + f0_jitter) *
                      (1.0 + 0.02 * std::sin(2.0 * M_PI * 5.0 * t + vib_phase));
    phase += f0 / sample_rate;
    if (phase >= 1.0) {
      phase -= 1.0;
      x[i] = 1.0;
    }
    x[i] += 0.015 * rng.normal();
  }

  for (const Formant& f : profile.formants)
    resonate(x, f.freq_hz, f.bandwidth_hz, sample_rate);

  // Syllable-like amplitude modulation, floor 0.1 so voiced frames stay well
  // above digital silence, plus short edge ramps.
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    x[i] *= 0.55 + 0.45 * std::sin(2.0 * M_PI * profile.am_rate_hz * t +
                                   am_phase);
  }
  const size_t ramp = std::min<size_t>(n / 2, sample_rate / 200);
  for (size_t i = 0; i < ramp; ++i) {
    const double g = static_cast<double>(i + 1) / (ramp + 1);
    x[i] *= g;
    x[n - 1 - i] *= g;
  }

  AudioBuffer out{std::move(x), sample_rate};
  peak_normalize(out);
  return out;
}

AudioBuffer make_noise(double duration_s, uint64_t seed, int sample_rate) {
  if (duration_s <= 0.0)
    throw std::invalid_argument("svvad: noise duration must be positive");
  const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  Rng rng(mix_seed(seed, 0x6e6f697365ULL));
  std::vector<double> x(n);
  double prev = 0.0;
  const double a = 0.85;  // first-order lowpass
  for (size_t i = 0; i < n; ++i) {
    prev = a * prev + (1.0 - a) * rng.normal();
    x[i] = prev;
  }
  AudioBuffer out{std::move(x), sample_rate};
  peak_normalize(out);
  return out;
}

AudioBuffer make_silence(double duration_s, int sample_rate) {
  const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  return AudioBuffer{std::vector<double>(n, 0.0), sample_rate};
}

AudioBuffer mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise,
                       double snr_db) {
  if (speech.sample_rate != noise.sample_rate)
    throw std::invalid_argument("svvad: mix_at_snr sample rates differ");
  if (noise.samples.empty())
    throw std::invalid_argument("svvad: mix_at_snr noise is empty");
  const double p_speech = mean_power(speech);
  if (p_speech <= 0.0)
    throw std::invalid_argument("svvad: mix_at_snr speech has zero power");

  std::vector<double> tiled(speech.size());
  for (size_t i = 0; i < tiled.size(); ++i)
    tiled[i] = noise.samples[i % noise.samples.size()];
  double p_noise = 0.0;
  for (double v : tiled) p_noise += v * v;
  p_noise /= static_cast<double>(tiled.size());
  if (p_noise <= 0.0)
    throw std::invalid_argument("svvad: mix_at_snr noise has zero power");

  const double g = std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
  AudioBuffer out;
  out.sample_rate = speech.sample_rate;
  out.samples.resize(speech.size());
  for (size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = speech.samples[i] + g * tiled[i];
  peak_normalize(out);
  return out;
}

AudioBuffer apply_reverb(const AudioBuffer& speech, double rt60_s,
                         uint64_t seed) {
  if (rt60_s < 0.1 || rt60_s > 0.6)
    throw std::invalid_argument("svvad: rt60 outside [0.1, 0.6]");
  const int sr = speech.sample_rate;
  const size_t ir_len =
      static_cast<size_t>(std::llround(1.2 * rt60_s * sr)) + 1;
  Rng rng(mix_seed(seed, 0x72657665ULL));

  // Unit direct path, then a noise tail with envelope 10^(-3 t / rt60) so the
  // tail alone decays 60 dB over rt60. The tail gain scales with rt60: short
  // rooms stay nearly dry.
  std::vector<double> ir(ir_len, 0.0);
  ir[0] = 1.0;
  const double tail_gain = 0.12 * rt60_s;
  const double n60 = rt60_s * sr;
  for (size_t i = 1; i < ir_len; ++i)
    ir[i] = tail_gain * rng.normal() *
            std::pow(10.0, -3.0 * static_cast<double>(i) / n60);

  std::vector<double> conv = fft_convolve(speech.samples, ir);
  conv.resize(speech.size());
  AudioBuffer out{std::move(conv), sr};
  peak_normalize(out);
  return out;
}

SpeakerCorpus::SpeakerCorpus(size_t n_speakers, uint64_t seed, int sample_rate)
    : seed_(seed), sample_rate_(sample_rate) {
  if (n_speakers == 0)
    throw std::invalid_argument("svvad: corpus needs at least one speaker");

  // Latin-hypercube assignment per dimension keeps every pair of speakers
  // apart in at least f0 and the formant centers.
  const size_t n = n_speakers;
  Rng rng(mix_seed(seed, 0x636f7270ULL));
  auto permuted = [&](uint64_t salt) {
    std::vector<size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    Rng r(mix_seed(seed, salt));
    for (size_t i = n; i > 1; --i) std::swap(p[i - 1], p[r.index(i)]);
    return p;
  };
  auto f0_bins = permuted(1);
  auto f1_bins = permuted(2);
  auto f2_bins = permuted(3);
  auto f3_bins = permuted(4);

  auto lhs = [&](size_t bin, double lo, double hi) {
    const double width = (hi - lo) / static_cast<double>(n);
    return lo + (static_cast<double>(bin) + rng.uniform(0.25, 0.75)) * width;
  };

  profiles_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    SpeakerProfile& p = profiles_[i];
    p.id = static_cast<int>(i);
    p.f0_hz = lhs(f0_bins[i], 85.0, 290.0);
    p.formants = {
        {lhs(f1_bins[i], 320.0, 900.0), rng.uniform(60.0, 100.0)},
        {lhs(f2_bins[i], 1000.0, 2300.0), rng.uniform(80.0, 140.0)},
        {lhs(f3_bins[i], 2400.0, 3400.0), rng.uniform(100.0, 180.0)},
    };
    p.am_rate_hz = rng.uniform(2.0, 5.0);
  }
}

AudioBuffer SpeakerCorpus::utterance(size_t speaker, double duration_s,
                                     uint64_t seed) const {
  if (speaker >= profiles_.size())
    throw std::out_of_range("svvad: speaker index out of range");
  return synth_utterance(profiles_[speaker], duration_s,
                         mix_seed(seed_, seed), sample_rate_);
}

}  // namespace svvad
