#include "svvad/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "svvad/rng.hpp"

namespace svvad {

namespace {

std::atomic<uint64_t> g_label_calls{0};

struct PlanItem {
  bool is_speech = false;
  int speaker = -1;
  uint64_t utt_seed = 0;
  size_t dur_samples = 0;
  bool joined = false;
  bool overlapped = false;
  size_t ov_samples = 0;
};

// The Algorithm-1 loop: append speech (from the given speaker set) or
// silence until the target length is reached. The speech/silence draw is a
// plain Bernoulli(p_spk) per append; only the speaker identity is resampled
// when it would repeat the previous segment's speaker, and consecutive
// silences merge, which keeps the append statistics at their nominal rates.
std::vector<PlanItem> plan_segments(const GenPolicy& policy,
                                    const std::vector<int>& speakers,
                                    size_t target_samples, int sr, Rng& rng) {
  std::vector<PlanItem> plan;
  size_t length = 0;
  size_t prev_len = 0;
  int prev_speaker = -1;  // -1 when the previous append was silence or none
  while (length < target_samples) {
    PlanItem item;
    item.joined = length > 0;
    if (rng.bernoulli(policy.p_spk)) {
      item.is_speech = true;
      int id = speakers[rng.index(speakers.size())];
      if (speakers.size() > 1) {
        for (int tries = 0; tries < 8 && id == prev_speaker; ++tries)
          id = speakers[rng.index(speakers.size())];
      }
      item.speaker = id;
      item.utt_seed = rng.next_u64();
      const double dur = rng.uniform(policy.segment_lo_s, policy.segment_hi_s);
      item.dur_samples = static_cast<size_t>(std::llround(dur * sr));
      if (item.joined && rng.bernoulli(policy.p_overlap)) {
        item.overlapped = true;
        const double ratio = rng.uniform(policy.overlap_lo, policy.overlap_hi);
        item.ov_samples = static_cast<size_t>(std::llround(
            ratio * static_cast<double>(std::min(item.dur_samples, prev_len))));
      }
      prev_speaker = id;
      prev_len = item.dur_samples;
    } else {
      const double dur = rng.uniform(policy.silence_lo_s, policy.silence_hi_s);
      item.dur_samples = static_cast<size_t>(std::llround(dur * sr));
      prev_speaker = -1;
      prev_len = item.dur_samples;
    }
    length += item.dur_samples - std::min(item.ov_samples, length);
    plan.push_back(item);
  }
  return plan;
}

struct Built {
  AudioBuffer audio;
  std::vector<SegmentInfo> segments;
  std::set<int> speakers;
};

// Materializes a plan, optionally splicing the anchor utterance in as a
// plain-concatenated segment at the given position.
Built materialize(const std::vector<PlanItem>& plan, const SpeakerCorpus& corpus,
                  const AudioBuffer* anchor, int anchor_speaker,
                  size_t anchor_pos) {
  const int sr = corpus.sample_rate();
  Built out;
  out.audio.sample_rate = sr;
  std::vector<double>& buf = out.audio.samples;
  size_t length = 0;

  auto place = [&](const std::vector<double>& samples, size_t start) {
    if (buf.size() < start + samples.size())
      buf.resize(start + samples.size(), 0.0);
    for (size_t i = 0; i < samples.size(); ++i) buf[start + i] += samples[i];
    length = std::max(length, start + samples.size());
  };

  auto insert_anchor = [&] {
    SegmentInfo info;
    info.is_speech = true;
    info.speaker = anchor_speaker;
    info.start = length;
    info.end = length + anchor->samples.size();
    info.joined = length > 0;
    info.is_anchor_insert = true;
    place(anchor->samples, length);
    out.segments.push_back(info);
    out.speakers.insert(anchor_speaker);
  };

  for (size_t i = 0; i <= plan.size(); ++i) {
    if (anchor != nullptr && i == anchor_pos) insert_anchor();
    if (i == plan.size()) break;
    const PlanItem& item = plan[i];
    SegmentInfo info;
    info.is_speech = item.is_speech;
    info.speaker = item.speaker;
    info.joined = item.joined;
    info.overlapped = item.overlapped;
    const size_t ov = std::min(item.ov_samples, length);
    const size_t start = item.overlapped ? length - ov : length;
    if (item.is_speech) {
      AudioBuffer utt = corpus.utterance(static_cast<size_t>(item.speaker),
                                         static_cast<double>(item.dur_samples) / sr,
                                         item.utt_seed);
      place(utt.samples, start);
      info.start = start;
      info.end = start + utt.samples.size();
      out.speakers.insert(item.speaker);
    } else {
      if (buf.size() < length + item.dur_samples)
        buf.resize(length + item.dur_samples, 0.0);
      info.start = length;
      info.end = length + item.dur_samples;
      length = info.end;
    }
    out.segments.push_back(info);
  }
  buf.resize(length, 0.0);
  peak_normalize(out.audio);
  return out;
}

void augment_in_place(AudioBuffer& audio, const GenPolicy& policy, Rng& rng) {
  if (!policy.augment) return;
  const bool add_noise = rng.bernoulli(policy.augment_prob);
  const double snr = rng.uniform(policy.snr_lo_db, policy.snr_hi_db);
  const uint64_t noise_seed = rng.next_u64();
  const bool add_reverb = rng.bernoulli(policy.augment_prob);
  const double rt60 = rng.uniform(0.1, 0.6);
  const uint64_t reverb_seed = rng.next_u64();
  if (add_noise && mean_power(audio) > 0.0) {
    AudioBuffer noise = make_noise(audio.duration_s() + 0.1, noise_seed,
                                   audio.sample_rate);
    audio = mix_at_snr(audio, noise, snr);
  }
  if (add_reverb) audio = apply_reverb(audio, rt60, reverb_seed);
}

std::vector<int> pick_speakers(const std::vector<int>& pool, size_t count,
                               Rng& rng) {
  std::vector<int> shuffled = pool;
  for (size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
  shuffled.resize(count);
  return shuffled;
}

}  // namespace

const char* frame_class_name(FrameClass c) {
  switch (c) {
    case FrameClass::kNs: return "ns";
    case FrameClass::kTss: return "tss";
    case FrameClass::kNtss: return "ntss";
  }
  return "?";
}

TripletSample generate_triplet(const GenPolicy& policy,
                               const SpeakerCorpus& corpus, uint64_t seed) {
  if (corpus.size() < policy.max_speakers + 1)
    throw std::invalid_argument(
        "svvad: corpus has " + std::to_string(corpus.size()) +
        " speakers; policy needs at least " +
        std::to_string(policy.max_speakers + 1));
  if (policy.max_speakers < 1 || policy.max_speakers > 3)
    throw std::invalid_argument("svvad: max_speakers must be in [1, 3]");
  if (policy.anchor_s <= 0.0 || policy.positive_s <= 0.0 ||
      policy.negative_s <= 0.0)
    throw std::invalid_argument("svvad: target durations must be positive");
  if (policy.positive_s < policy.anchor_s)
    throw std::invalid_argument(
        "svvad: positive target shorter than the anchor; target length "
        "unreachable");

  const int sr = corpus.sample_rate();
  Rng rng(mix_seed(seed, 0x747269ULL));

  TripletSample out;
  out.seed = seed;
  out.anchor_speaker = static_cast<int>(rng.index(corpus.size()));
  out.anchor = corpus.utterance(static_cast<size_t>(out.anchor_speaker),
                                policy.anchor_s, rng.next_u64());

  std::vector<int> others;
  for (size_t i = 0; i < corpus.size(); ++i)
    if (static_cast<int>(i) != out.anchor_speaker)
      others.push_back(static_cast<int>(i));

  // D_p contains the anchor speaker; D_n never does.
  const size_t n_pos = 1 + rng.index(policy.max_speakers);
  std::vector<int> d_p = {out.anchor_speaker};
  if (n_pos > 1) {
    std::vector<int> extra = pick_speakers(others, n_pos - 1, rng);
    d_p.insert(d_p.end(), extra.begin(), extra.end());
  }
  const size_t n_neg = 1 + rng.index(policy.max_speakers);
  std::vector<int> d_n = pick_speakers(others, n_neg, rng);

  const size_t pos_loop_target = static_cast<size_t>(
      std::llround((policy.positive_s - policy.anchor_s) * sr));
  const size_t neg_target =
      static_cast<size_t>(std::llround(policy.negative_s * sr));

  std::vector<PlanItem> pos_plan =
      plan_segments(policy, d_p, pos_loop_target, sr, rng);
  const size_t anchor_pos = rng.index(pos_plan.size() + 1);
  std::vector<PlanItem> neg_plan =
      plan_segments(policy, d_n, neg_target, sr, rng);

  Built pos = materialize(pos_plan, corpus, &out.anchor, out.anchor_speaker,
                          anchor_pos);
  Built neg = materialize(neg_plan, corpus, nullptr, -1, 0);

  out.positive = std::move(pos.audio);
  out.positive_segments = std::move(pos.segments);
  out.positive_speakers = std::move(pos.speakers);
  out.negative = std::move(neg.audio);
  out.negative_segments = std::move(neg.segments);
  out.negative_speakers = std::move(neg.speakers);

  augment_in_place(out.anchor, policy, rng);
  augment_in_place(out.positive, policy, rng);
  augment_in_place(out.negative, policy, rng);
  return out;
}

std::vector<FrameClass> frame_labels(const std::vector<SegmentInfo>& segments,
                                     int anchor_speaker, size_t n_samples,
                                     int sample_rate, const MelConfig& mel) {
  g_label_calls.fetch_add(1, std::memory_order_relaxed);
  const size_t T = mel.frame_count(n_samples, sample_rate);
  const size_t win = mel.win_samples(sample_rate);
  const size_t hop = mel.hop_samples(sample_rate);
  std::vector<FrameClass> labels(T, FrameClass::kNs);
  for (size_t t = 0; t < T; ++t) {
    const size_t lo = t * hop;
    const size_t hi = lo + win;
    bool anchor_active = false, other_active = false;
    for (const SegmentInfo& seg : segments) {
      if (!seg.is_speech || seg.end <= lo || seg.start >= hi) continue;
      if (seg.speaker == anchor_speaker)
        anchor_active = true;
      else
        other_active = true;
    }
    labels[t] = anchor_active ? FrameClass::kTss
                              : (other_active ? FrameClass::kNtss
                                              : FrameClass::kNs);
  }
  return labels;
}

uint64_t label_accessor_invocations() {
  return g_label_calls.load(std::memory_order_relaxed);
}

}  // namespace svvad
