#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "svvad/audio.hpp"
#include "svvad/features.hpp"
#include "svvad/synth.hpp"

using namespace svvad;

namespace {

// Independent spectral oracle: naive DFT power over the whole buffer,
// accumulated into mel bins using the filter centers recomputed here.
size_t dominant_mel_bin(const AudioBuffer& audio, size_t n_mels) {
  // Average power spectrum over 64 ms windows (naive DFT, no shared code).
  const size_t win = 1024;
  std::vector<double> power(win / 2 + 1, 0.0);
  size_t n_frames = 0;
  for (size_t start = 0; start + win <= audio.size(); start += win) {
    for (size_t k = 0; k <= win / 2; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (size_t i = 0; i < win; ++i) {
        const double angle = -2.0 * M_PI * k * i / win;
        acc += audio.samples[start + i] *
               std::complex<double>(std::cos(angle), std::sin(angle));
      }
      power[k] += std::norm(acc);
    }
    ++n_frames;
    if (n_frames >= 8) break;
  }

  auto mel_of = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  const double mlo = mel_of(20.0), mhi = mel_of(7600.0);
  std::vector<double> bins(n_mels, 0.0);
  for (size_t k = 0; k <= win / 2; ++k) {
    const double f = static_cast<double>(k) * audio.sample_rate / win;
    if (f < 20.0 || f > 7600.0) continue;
    const double frac = (mel_of(f) - mlo) / (mhi - mlo);
    size_t b = std::min(n_mels - 1, static_cast<size_t>(frac * n_mels));
    bins[b] += power[k];
  }
  return static_cast<size_t>(
      std::max_element(bins.begin(), bins.end()) - bins.begin());
}

}  // namespace

TEST_CASE("utterance length and determinism") {
  SpeakerCorpus corpus(4, 11);
  AudioBuffer a = corpus.utterance(0, 1.0, 5);
  CHECK(a.size() == 16000);
  AudioBuffer b = corpus.utterance(0, 1.0, 5);
  CHECK(a.samples == b.samples);
  AudioBuffer c = corpus.utterance(0, 1.0, 6);
  CHECK(a.samples != c.samples);
  CHECK_THROWS(synth_utterance(corpus.profile(0), -1.0, 3));
  double peak = 0.0;
  for (double s : a.samples) peak = std::max(peak, std::fabs(s));
  CHECK(peak <= 1.0);
  CHECK(peak == doctest::Approx(0.95));
}

TEST_CASE("profiles stay inside their documented ranges") {
  SpeakerCorpus corpus(20, 11);
  for (size_t i = 0; i < corpus.size(); ++i) {
    const SpeakerProfile& p = corpus.profile(i);
    CHECK(p.f0_hz >= 80.0);
    CHECK(p.f0_hz <= 300.0);
    CHECK(p.formants.size() >= 2);
    CHECK(p.formants.size() <= 3);
    for (const Formant& f : p.formants) {
      CHECK(f.freq_hz >= 300.0);
      CHECK(f.freq_hz <= 3500.0);
    }
  }
}

TEST_CASE("distinct profiles have distinct dominant spectral peaks") {
  SpeakerCorpus corpus(20, 11);
  AudioBuffer a = corpus.utterance(0, 1.5, 101);
  AudioBuffer b = corpus.utterance(2, 1.5, 103);
  const size_t bin_a = dominant_mel_bin(a, 40);
  const size_t bin_b = dominant_mel_bin(b, 40);
  const size_t gap = bin_a > bin_b ? bin_a - bin_b : bin_b - bin_a;
  CHECK(gap > 1);

  // Corpus-wide: the dominant peaks spread over many mel bins rather than
  // piling onto a handful.
  std::vector<size_t> bins;
  for (size_t s = 0; s < corpus.size(); ++s)
    bins.push_back(dominant_mel_bin(corpus.utterance(s, 1.5, 101 + s), 40));
  std::sort(bins.begin(), bins.end());
  const size_t distinct =
      static_cast<size_t>(std::unique(bins.begin(), bins.end()) - bins.begin());
  CHECK(distinct >= 10);
}

TEST_CASE("mix_at_snr hits the requested ratio") {
  SpeakerCorpus corpus(4, 11);
  AudioBuffer speech = corpus.utterance(2, 1.0, 7);
  AudioBuffer noise = make_noise(0.4, 9);  // shorter: exercises tiling

  for (double snr : {0.0, 10.0, 23.5, 30.0, 40.0}) {
    AudioBuffer mixed = mix_at_snr(speech, noise, snr);
    REQUIRE(mixed.size() == speech.size());
    // Recover the mix gain from the residual relative to the scaled speech.
    // mixed = c * (speech + g * tiled); estimate c from a least-squares fit
    // of mixed against speech + tiled.
    std::vector<double> tiled(speech.size());
    for (size_t i = 0; i < tiled.size(); ++i)
      tiled[i] = noise.samples[i % noise.samples.size()];
    // Solve [speech tiled] * [cs; cn] = mixed exactly (it is in the span).
    double ss = 0, st = 0, tt = 0, ms = 0, mt = 0;
    for (size_t i = 0; i < tiled.size(); ++i) {
      ss += speech.samples[i] * speech.samples[i];
      st += speech.samples[i] * tiled[i];
      tt += tiled[i] * tiled[i];
      ms += mixed.samples[i] * speech.samples[i];
      mt += mixed.samples[i] * tiled[i];
    }
    const double det = ss * tt - st * st;
    const double cs = (ms * tt - mt * st) / det;
    const double cn = (mt * ss - ms * st) / det;
    double p_speech = 0, p_noise = 0;
    for (size_t i = 0; i < tiled.size(); ++i) {
      p_speech += cs * speech.samples[i] * cs * speech.samples[i];
      p_noise += cn * tiled[i] * cn * tiled[i];
    }
    const double measured = 10.0 * std::log10(p_speech / p_noise);
    CHECK(std::fabs(measured - snr) < 0.1);
  }

  // Equal-power inputs at snr 0 mix with unit gain before renormalization.
  AudioBuffer n2 = make_noise(1.0, 10);
  double gs = std::sqrt(mean_power(speech)), gn = std::sqrt(mean_power(n2));
  AudioBuffer eq_noise = n2;
  for (double& s : eq_noise.samples) s *= gs / gn;
  AudioBuffer mixed = mix_at_snr(speech, eq_noise, 0.0);
  // mixed == c * (speech + 1.0 * eq_noise) for some c
  double num = 0, den = 0;
  for (size_t i = 0; i < mixed.size(); ++i) {
    const double base = speech.samples[i] + eq_noise.samples[i];
    num += mixed.samples[i] * base;
    den += base * base;
  }
  const double c = num / den;
  for (size_t i = 0; i < 50; ++i) {
    const double base = speech.samples[i] + eq_noise.samples[i];
    CHECK(mixed.samples[i] == doctest::Approx(c * base).epsilon(1e-9));
  }

  AudioBuffer silence = make_silence(1.0);
  CHECK_THROWS(mix_at_snr(silence, noise, 10.0));
}

TEST_CASE("reverb keeps a dry signal recognizable at the minimum rt60") {
  SpeakerCorpus corpus(4, 11);
  AudioBuffer speech = corpus.utterance(1, 1.0, 21);
  AudioBuffer wet = apply_reverb(speech, 0.1, 77);
  REQUIRE(wet.size() == speech.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  const double n = static_cast<double>(speech.size());
  for (size_t i = 0; i < speech.size(); ++i) {
    sx += speech.samples[i];
    sy += wet.samples[i];
    sxy += speech.samples[i] * wet.samples[i];
    sxx += speech.samples[i] * speech.samples[i];
    syy += wet.samples[i] * wet.samples[i];
  }
  const double corr = (n * sxy - sx * sy) /
                      std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(corr > 0.99);

  CHECK_THROWS(apply_reverb(speech, 0.05, 1));
  CHECK_THROWS(apply_reverb(speech, 0.7, 1));
}

TEST_CASE("impulse response decay matches rt60 via Schroeder integration") {
  const int sr = 16000;
  for (double rt60 : {0.2, 0.4, 0.6}) {
    // Impulse in, IR out (convolution identity), up to peak normalization.
    AudioBuffer impulse;
    impulse.sample_rate = sr;
    impulse.samples.assign(static_cast<size_t>(2.0 * sr), 0.0);
    impulse.samples[0] = 1.0;
    AudioBuffer ir = apply_reverb(impulse, rt60, 123);

    // Backward-integrated tail energy; T30 slope fit between -5 and -35 dB,
    // excluding the direct-path sample.
    std::vector<double> sch(ir.size(), 0.0);
    double acc = 0.0;
    for (size_t i = ir.size(); i-- > 1;) {
      acc += ir.samples[i] * ir.samples[i];
      sch[i] = acc;
    }
    const double ref = sch[1];
    size_t t5 = 0, t35 = 0;
    for (size_t i = 1; i < ir.size() && sch[i] > 0; ++i) {
      const double db = 10.0 * std::log10(sch[i] / ref);
      if (t5 == 0 && db <= -5.0) t5 = i;
      if (db <= -35.0) {
        t35 = i;
        break;
      }
    }
    REQUIRE(t5 > 0);
    REQUIRE(t35 > t5);
    const double rt_est = 2.0 * static_cast<double>(t35 - t5) / sr;
    CHECK(std::fabs(rt_est - rt60) / rt60 < 0.2);
  }
}

TEST_CASE("wav round trip") {
  SpeakerCorpus corpus(2, 3);
  AudioBuffer a = corpus.utterance(0, 0.5, 1);
  const std::string path = "test_roundtrip.wav";
  write_wav(path, a);
  AudioBuffer back = read_wav(path);
  REQUIRE(back.size() == a.size());
  CHECK(back.sample_rate == a.sample_rate);
  double max_err = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    max_err = std::max(max_err, std::fabs(a.samples[i] - back.samples[i]));
  CHECK(max_err < 1.0 / 32000.0);
  std::remove(path.c_str());
}
