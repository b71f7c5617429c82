#pragma once

#include <atomic>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "svvad/audio.hpp"
#include "svvad/features.hpp"
#include "svvad/synth.hpp"

namespace svvad {

struct GenPolicy {
  double p_spk = 0.9;
  double p_overlap = 0.3;
  size_t max_speakers = 3;
  double anchor_s = 6.0;
  double positive_s = 8.0;
  double negative_s = 8.0;
  // Overlap consumes this fraction of the shorter of the two joined segments.
  double overlap_lo = 0.1;
  double overlap_hi = 0.4;
  // Speech segment duration per get() call.
  double segment_lo_s = 0.5;
  double segment_hi_s = 2.0;
  // Silence segment duration per get() call.
  double silence_lo_s = 0.2;
  double silence_hi_s = 1.0;
  bool augment = true;
  double augment_prob = 0.5;
  double snr_lo_db = 10.0;
  double snr_hi_db = 30.0;
};

enum class FrameClass { kNs = 0, kTss = 1, kNtss = 2 };

const char* frame_class_name(FrameClass c);

// One appended segment in a constructed sample, kept for labeling and for
// the policy statistics; start/end are sample indices in the final buffer.
struct SegmentInfo {
  bool is_speech = false;
  int speaker = -1;  // -1 for silence
  size_t start = 0;
  size_t end = 0;
  bool joined = false;      // appended onto a non-empty buffer
  bool overlapped = false;  // join used overlapConcat
  bool is_anchor_insert = false;
};

struct TripletSample {
  AudioBuffer anchor, positive, negative;
  int anchor_speaker = -1;
  std::set<int> positive_speakers;
  std::set<int> negative_speakers;
  std::vector<SegmentInfo> positive_segments;
  std::vector<SegmentInfo> negative_segments;
  uint64_t seed = 0;
};

// One training triplet per Algorithm-1-style construction: a clean anchor
// utterance, a positive mixture containing the anchor itself, and a negative
// mixture from speakers other than the anchor's. Deterministic per
// (policy, corpus, seed).
TripletSample generate_triplet(const GenPolicy& policy,
                               const SpeakerCorpus& corpus, uint64_t seed);

// Per-frame classes for a constructed sample at feature-frame resolution:
// tss when the anchor speaker is active in the frame, ntss when only other
// speakers are, ns otherwise. Length equals the log-mel frame count of the
// buffer. The gate-training path never calls this; invocations are counted
// so tests can enforce that.
std::vector<FrameClass> frame_labels(const std::vector<SegmentInfo>& segments,
                                     int anchor_speaker, size_t n_samples,
                                     int sample_rate, const MelConfig& mel);

// Number of frame_labels() calls in this process; the label-free training
// contract is checked against it.
uint64_t label_accessor_invocations();

}  // namespace svvad
