#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svvad/backbone.hpp"
#include "svvad/baselines.hpp"
#include "svvad/datagen.hpp"
#include "svvad/spk_encoder.hpp"
#include "svvad/synth.hpp"

namespace svvad {

enum class GateKind { kNone, kEnergy, kPvad, kSvvad };
GateKind gate_from_string(const std::string& name);
std::string gate_name(GateKind gate);

// One verification trial: a clean single-speaker enrollment and a
// constructed test utterance whose speech is (1 - P) labeled speaker and P
// other speakers by duration, silence excluded from the accounting.
struct Trial {
  size_t enroll_speaker = 0;
  size_t labeled_speaker = 0;
  bool target = false;
  double contamination = 0.0;
  AudioBuffer enroll_audio;
  AudioBuffer test_audio;
  std::vector<SegmentInfo> test_segments;
  // Measured fraction of other-speaker speech duration, from the metadata.
  double measured_contamination = 0.0;
};

struct TrialSet {
  double contamination = 0.0;
  uint64_t seed = 0;
  std::vector<Trial> trials;
};

struct EvalOptions {
  std::vector<double> contamination{0.0, 0.3, 0.5, 0.7};
  size_t n_trials = 200;  // per (P, repeat), balanced targets/non-targets
  size_t repeats = 3;
  uint64_t seed = 7;
  double enroll_s = 2.0;
  double speech_budget_s = 2.5;
  double energy_threshold_db = 10.0;
  double pvad_threshold = 0.5;
};

// Balanced target/non-target trials at contamination P; the three repeats of
// the protocol come from distinct repeat seeds.
TrialSet build_trials(const SpeakerCorpus& corpus, double contamination,
                      size_t n_trials, uint64_t repeat_seed,
                      const EvalOptions& opts);

// EER via a threshold sweep with linear interpolation between the bracketing
// operating points; ties break toward the lower threshold. Returns
// (eer, threshold). Throws unless both classes are present.
std::pair<double, double> compute_eer(const std::vector<double>& scores,
                                      const std::vector<uint8_t>& labels);

// min over thresholds of c_miss*p_target*P_miss + c_fa*(1-p_target)*P_fa,
// normalized by min(c_miss*p_target, c_fa*(1-p_target)).
double compute_min_dcf(const std::vector<double>& scores,
                       const std::vector<uint8_t>& labels,
                       double p_target = 0.01, double c_fa = 1.0,
                       double c_miss = 1.0);

struct EvalRow {
  std::string gate;
  double contamination = 0.0;
  size_t repeat = 0;
  size_t n_target = 0;
  size_t n_nontarget = 0;
  double eer = 0.0;
  double min_dcf = 0.0;
  double threshold = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_eer(double contamination) const;
  double mean_min_dcf(double contamination) const;
};

struct EvalContext {
  const SpeakerCorpus* corpus = nullptr;
  const SpeakerEncoder* encoder = nullptr;
  MelConfig mel;
  const SvvadModel* svvad = nullptr;  // required for kSvvad
  const PvadModel* pvad = nullptr;    // required for kPvad
  EvalOptions opts;
};

// Scores one trial under a gate; the scoring path is shared across gates,
// only the feature-gating step differs. An all-dropped hard gate falls back
// to the raw features so trial counts stay constant.
double score_trial(GateKind gate, const EvalContext& ctx, const Trial& trial);

// Full grid: every contamination ratio, every repeat.
EvalReport evaluate_gate(GateKind gate, const EvalContext& ctx);

// The report CSV records the frozen encoder's seed and dimensions.
std::string report_csv(const EvalReport& report, const SpeakerEncoder& encoder);
void write_report_csv(const std::string& path, const EvalReport& report,
                      const SpeakerEncoder& encoder);

// Per-frame (frame_idx, time_s, gamma, beta, label) for one trial.
std::string decisions_csv(const SvvadModel& model, const EvalContext& ctx,
                          const Trial& trial);

// Mean gamma over tss frames minus mean gamma over ntss frames; nullopt when
// the trial lacks one of the classes.
std::optional<double> gamma_direction(const SvvadModel& model,
                                      const EvalContext& ctx,
                                      const Trial& trial);

// Gated test-utterance embeddings, one row per trial:
// utt_id, speaker, P, target, e0..e{E-1}.
std::string embeddings_csv(GateKind gate, const EvalContext& ctx,
                           const std::vector<TrialSet>& sets);

}  // namespace svvad
