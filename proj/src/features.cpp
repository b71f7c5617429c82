#include "svvad/features.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "svvad/dsp.hpp"

namespace svvad {

size_t MelConfig::win_samples(int sample_rate) const {
  return static_cast<size_t>(std::llround(win_s * sample_rate));
}

size_t MelConfig::hop_samples(int sample_rate) const {
  return static_cast<size_t>(std::llround(hop_s * sample_rate));
}

size_t MelConfig::frame_count(size_t n_samples, int sample_rate) const {
  const size_t win = win_samples(sample_rate);
  const size_t hop = hop_samples(sample_rate);
  if (n_samples < win) return 0;
  return (n_samples - win) / hop + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

// Triangular filterbank as a dense (n_mels x n_bins) weight matrix.
std::vector<double> mel_filterbank(const MelConfig& cfg, int sample_rate,
                                   size_t n_fft) {
  const size_t n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  std::vector<double> weights(cfg.n_mels * n_bins, 0.0);
  for (size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (size_t b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / n_fft;
      if (f <= left || f >= right) continue;
      weights[m * n_bins + b] = (f < center) ? (f - left) / (center - left)
                                             : (right - f) / (right - center);
    }
  }
  return weights;
}

}  // namespace

std::vector<double> mel_filter_centers_hz(const MelConfig& cfg,
                                          int sample_rate) {
  (void)sample_rate;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> centers(cfg.n_mels);
  for (size_t m = 0; m < cfg.n_mels; ++m)
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
  return centers;
}

FeatureMatrix logmel(const AudioBuffer& audio, const MelConfig& cfg) {
  const int sr = audio.sample_rate;
  const size_t win = cfg.win_samples(sr);
  const size_t hop = cfg.hop_samples(sr);
  if (audio.samples.size() < win)
    throw std::invalid_argument(
        "svvad: audio shorter than one analysis window (" +
        std::to_string(audio.samples.size()) + " < " + std::to_string(win) +
        " samples)");

  const size_t T = cfg.frame_count(audio.samples.size(), sr);
  const size_t n_fft = next_pow2(win);
  const size_t n_bins = n_fft / 2 + 1;
  const std::vector<double> fbank = mel_filterbank(cfg, sr, n_fft);

  std::vector<double> hann(win);
  for (size_t i = 0; i < win; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  FeatureMatrix out;
  out.T = T;
  out.F = cfg.n_mels;
  out.hop_s = cfg.hop_s;
  out.win_s = cfg.win_s;
  out.values.assign(T * cfg.n_mels, 0.0);

  std::vector<double> frame(win);
  for (size_t t = 0; t < T; ++t) {
    const double* src = audio.samples.data() + t * hop;
    for (size_t i = 0; i < win; ++i) frame[i] = src[i] * hann[i];
    const std::vector<double> spec = power_spectrum(frame, n_fft);
    for (size_t m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* w = fbank.data() + m * n_bins;
      for (size_t b = 0; b < n_bins; ++b) acc += w[b] * spec[b];
      out.at(t, m) = std::log(std::max(acc, cfg.log_floor));
    }
  }

  if (cfg.cmvn) {
    for (size_t m = 0; m < cfg.n_mels; ++m) {
      double mean = 0.0;
      for (size_t t = 0; t < T; ++t) mean += out.at(t, m);
      mean /= static_cast<double>(T);
      double var = 0.0;
      for (size_t t = 0; t < T; ++t) {
        const double d = out.at(t, m) - mean;
        var += d * d;
      }
      var /= static_cast<double>(T);
      const double istd = 1.0 / std::sqrt(var + 1e-8);
      for (size_t t = 0; t < T; ++t) out.at(t, m) = (out.at(t, m) - mean) * istd;
    }
  }
  return out;
}

void write_features_csv(const std::string& path, const FeatureMatrix& feats) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("svvad: cannot open for write: " + path);
  f << "# T=" << feats.T << " F=" << feats.F << " hop_s=" << feats.hop_s
    << " win_s=" << feats.win_s << "\n";
  for (size_t t = 0; t < feats.T; ++t) {
    for (size_t m = 0; m < feats.F; ++m) {
      if (m) f << ",";
      f << feats.at(t, m);
    }
    f << "\n";
  }
}

}  // namespace svvad
