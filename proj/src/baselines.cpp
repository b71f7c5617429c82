#include "svvad/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svvad/optim.hpp"
#include "svvad/rng.hpp"

namespace svvad {

std::vector<uint8_t> energy_vad(const AudioBuffer& audio, const MelConfig& mel,
                                double threshold_db) {
  const int sr = audio.sample_rate;
  const size_t win = mel.win_samples(sr);
  const size_t hop = mel.hop_samples(sr);
  const size_t T = mel.frame_count(audio.samples.size(), sr);

  std::vector<double> energy(T);
  for (size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    const double* src = audio.samples.data() + t * hop;
    for (size_t i = 0; i < win; ++i) acc += src[i] * src[i];
    energy[t] = acc / static_cast<double>(win) + 1e-12;
  }

  std::vector<double> sorted = energy;
  std::sort(sorted.begin(), sorted.end());
  const double floor_e = sorted[sorted.size() / 10];  // 10th percentile
  const double max_e = sorted.back();

  std::vector<uint8_t> mask(T, 0);
  const double range_db = 10.0 * std::log10(max_e / floor_e);
  if (range_db < threshold_db) {
    // Flat utterance: all speech or all silence, decided by absolute level
    // (-60 dBFS floor).
    const uint8_t keep = 10.0 * std::log10(max_e) > -60.0 ? 1 : 0;
    std::fill(mask.begin(), mask.end(), keep);
    return mask;
  }
  const double cut_db = 10.0 * std::log10(floor_e) + threshold_db;
  for (size_t t = 0; t < T; ++t)
    mask[t] = 10.0 * std::log10(energy[t]) > cut_db ? 1 : 0;
  return mask;
}

PvadModel::PvadModel(BackboneConfig cfg, uint64_t param_seed)
    : cfg_(cfg), store_(param_seed) {
  trunk_ = std::make_unique<SvvadTrunk>(cfg_, store_, "pvad");
  head_ = nn::Linear::create(store_, "pvad.head", cfg_.fused_dim(), 2);
}

Tensor PvadModel::forward_logits(const Tensor& x, const Tensor& v_enr) const {
  return head_.forward(trunk_->forward(x, v_enr));
}

FramePosterior PvadModel::posterior(const FeatureMatrix& feats,
                                    const Embedding& enroll) const {
  Tensor x = Tensor::from_values(feats.T, feats.F, feats.values);
  Tensor v = Tensor::row(enroll.values);
  Tensor probs = softmax_rows(forward_logits(x, v));
  FramePosterior out;
  out.T = feats.T;
  out.p = probs.values();
  return out;
}

std::vector<uint8_t> PvadModel::mask(const FeatureMatrix& feats,
                                     const Embedding& enroll,
                                     double threshold) const {
  FramePosterior post = posterior(feats, enroll);
  std::vector<uint8_t> m(post.T);
  for (size_t t = 0; t < post.T; ++t) m[t] = post.tss(t) > threshold ? 1 : 0;
  return m;
}

PvadTrainReport pvad_train(PvadModel& model, const SpeakerEncoder& encoder,
                           const SpeakerCorpus& corpus, const GenPolicy& policy,
                           const MelConfig& mel, size_t steps, double lr,
                           uint64_t seed, PvadLabelMode label_mode) {
  AdamWOptimizer opt(lr, 1e-5);
  Rng shuffle_rng(mix_seed(seed, 0x5f5fULL));
  PvadTrainReport report;
  report.steps = steps;
  for (size_t step = 0; step < steps; ++step) {
    const uint64_t tseed = mix_seed(seed ^ 0xbce7ULL, step);
    TripletSample triplet = generate_triplet(policy, corpus, tseed);

    FeatureMatrix fa = logmel(triplet.anchor, mel);
    Embedding enroll = encoder.embed(fa);
    Tensor v = Tensor::row(enroll.values);

    // Positive sample: tss where the anchor speaks; negative: never tss.
    struct Item {
      FeatureMatrix feats;
      std::vector<int> labels;
    };
    std::vector<Item> items;
    for (const auto& [audio, segments] :
         {std::pair{&triplet.positive, &triplet.positive_segments},
          std::pair{&triplet.negative, &triplet.negative_segments}}) {
      Item item;
      item.feats = logmel(*audio, mel);
      std::vector<FrameClass> classes =
          frame_labels(*segments, triplet.anchor_speaker, audio->size(),
                       audio->sample_rate, mel);
      item.labels.resize(classes.size());
      for (size_t t = 0; t < classes.size(); ++t)
        item.labels[t] = classes[t] == FrameClass::kTss ? 0 : 1;
      items.push_back(std::move(item));
    }

    if (label_mode == PvadLabelMode::kShuffled) {
      // Pool the step's labels across utterances before shuffling so neither
      // frame positions nor per-utterance label counts survive.
      std::vector<int> pooled;
      for (const Item& item : items)
        pooled.insert(pooled.end(), item.labels.begin(), item.labels.end());
      for (size_t t = pooled.size(); t > 1; --t)
        std::swap(pooled[t - 1], pooled[shuffle_rng.index(t)]);
      size_t offset = 0;
      for (Item& item : items) {
        std::copy_n(pooled.begin() + offset, item.labels.size(),
                    item.labels.begin());
        offset += item.labels.size();
      }
    }

    double loss_sum = 0.0;
    model.params().zero_grads();
    for (const Item& item : items) {
      Tensor x = Tensor::from_values(item.feats.T, item.feats.F,
                                     item.feats.values);
      Tensor logits = model.forward_logits(x, v);
      Tensor loss = softmax_cross_entropy_rows(logits, item.labels);
      loss_sum += loss.scalar_value();
      backward(loss);
    }
    opt.step(model.params());
    report.losses.push_back(loss_sum / 2.0);
  }
  model.params().zero_grads();
  return report;
}

std::optional<FeatureMatrix> gate_with_mask(const FeatureMatrix& feats,
                                            const std::vector<uint8_t>& mask) {
  if (mask.size() != feats.T)
    throw std::invalid_argument(
        "svvad: mask length " + std::to_string(mask.size()) +
        " does not match frame count " + std::to_string(feats.T));
  size_t kept = 0;
  for (uint8_t m : mask) kept += m != 0;
  if (kept == 0) return std::nullopt;
  FeatureMatrix out;
  out.T = kept;
  out.F = feats.F;
  out.hop_s = feats.hop_s;
  out.win_s = feats.win_s;
  out.values.reserve(kept * feats.F);
  for (size_t t = 0; t < feats.T; ++t)
    if (mask[t])
      out.values.insert(out.values.end(), feats.values.begin() + t * feats.F,
                        feats.values.begin() + (t + 1) * feats.F);
  return out;
}

}  // namespace svvad
