#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "svvad/backbone.hpp"
#include "svvad/datagen.hpp"
#include "svvad/features.hpp"
#include "svvad/spk_encoder.hpp"
#include "svvad/synth.hpp"
#include "svvad/trainer.hpp"

namespace svvad {

// Frame-wise class posteriors [p_tss, p_ntss]; rows sum to 1.
struct FramePosterior {
  size_t T = 0;
  std::vector<double> p;  // T x 2 row-major
  double tss(size_t t) const { return p[2 * t]; }
};

// Speaker-agnostic energy gate, frame grid aligned with the feature
// extractor. A frame is kept when its energy clears the utterance noise
// floor by threshold_db; a flat utterance is kept or dropped wholesale
// depending on its absolute level.
std::vector<uint8_t> energy_vad(const AudioBuffer& audio, const MelConfig& mel,
                                double threshold_db = 10.0);

// Frame classifier with the same conformer + fusion trunk as the gate model,
// ending in a two-way softmax per frame.
class PvadModel {
 public:
  PvadModel(BackboneConfig cfg, uint64_t param_seed);

  const BackboneConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  Tensor forward_logits(const Tensor& x, const Tensor& v_enr) const;
  FramePosterior posterior(const FeatureMatrix& feats,
                           const Embedding& enroll) const;
  std::vector<uint8_t> mask(const FeatureMatrix& feats, const Embedding& enroll,
                            double threshold = 0.5) const;

 private:
  BackboneConfig cfg_;
  ParameterStore store_;
  std::unique_ptr<SvvadTrunk> trunk_;
  nn::Linear head_;
};

struct PvadTrainReport {
  std::vector<double> losses;
  size_t steps = 0;
};

// kShuffled destroys the frame-to-label alignment; an ablation control for
// verifying that the trained accuracy comes from the labels.
enum class PvadLabelMode { kTrue, kShuffled };

// Supervised training on generator frame labels (tss vs not-tss; the ns and
// ntss classes collapse for the two-way posterior).
PvadTrainReport pvad_train(PvadModel& model, const SpeakerEncoder& encoder,
                           const SpeakerCorpus& corpus, const GenPolicy& policy,
                           const MelConfig& mel, size_t steps, double lr,
                           uint64_t seed,
                           PvadLabelMode label_mode = PvadLabelMode::kTrue);

// Keeps only masked frames, preserving order. Returns nullopt when every
// frame is dropped so the caller can fall back to the ungated features.
std::optional<FeatureMatrix> gate_with_mask(const FeatureMatrix& feats,
                                            const std::vector<uint8_t>& mask);

}  // namespace svvad
