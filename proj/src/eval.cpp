#include "svvad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "svvad/rng.hpp"

namespace svvad {

GateKind gate_from_string(const std::string& name) {
  if (name == "none") return GateKind::kNone;
  if (name == "energy") return GateKind::kEnergy;
  if (name == "pvad") return GateKind::kPvad;
  if (name == "svvad") return GateKind::kSvvad;
  throw std::invalid_argument("svvad: unknown gate: " + name);
}

std::string gate_name(GateKind gate) {
  switch (gate) {
    case GateKind::kNone: return "none";
    case GateKind::kEnergy: return "energy";
    case GateKind::kPvad: return "pvad";
    case GateKind::kSvvad: return "svvad";
  }
  return "?";
}

namespace {

// Splits a duration budget into segments in [lo, hi]; the remainder merges
// into the last segment when it would fall under lo.
std::vector<double> split_budget(double budget, double lo, double hi,
                                 Rng& rng) {
  std::vector<double> out;
  double remaining = budget;
  while (remaining > 1e-9) {
    double d = rng.uniform(lo, hi);
    if (d >= remaining || remaining - d < lo) {
      out.push_back(remaining);
      break;
    }
    out.push_back(d);
    remaining -= d;
  }
  return out;
}

}  // namespace

TrialSet build_trials(const SpeakerCorpus& corpus, double contamination,
                      size_t n_trials, uint64_t repeat_seed,
                      const EvalOptions& opts) {
  if (corpus.size() < 10)
    throw std::invalid_argument(
        "svvad: trial construction needs >= 10 speakers, corpus has " +
        std::to_string(corpus.size()));
  if (contamination < 0.0 || contamination >= 1.0)
    throw std::invalid_argument("svvad: contamination must be in [0, 1)");

  const int sr = corpus.sample_rate();
  TrialSet set;
  set.contamination = contamination;
  set.seed = repeat_seed;
  set.trials.reserve(n_trials);

  for (size_t i = 0; i < n_trials; ++i) {
    Rng rng(mix_seed(repeat_seed, 0x7472 + i));
    Trial trial;
    trial.target = (i % 2) == 0;
    trial.contamination = contamination;
    trial.enroll_speaker = rng.index(corpus.size());
    trial.labeled_speaker =
        trial.target ? trial.enroll_speaker
                     : (trial.enroll_speaker + 1 + rng.index(corpus.size() - 1)) %
                           corpus.size();
    trial.enroll_audio = corpus.utterance(trial.enroll_speaker, opts.enroll_s,
                                          rng.next_u64());

    // Speech budgets: (1 - P) labeled speaker, P contaminants. Contaminants
    // exclude both the labeled and the enrolled speaker.
    const double labeled_budget = (1.0 - contamination) * opts.speech_budget_s;
    const double other_budget = contamination * opts.speech_budget_s;

    struct Piece {
      int speaker;
      double dur;
      uint64_t seed;
    };
    std::vector<Piece> pieces;
    for (double d : split_budget(labeled_budget, 0.4, 0.9, rng))
      pieces.push_back({static_cast<int>(trial.labeled_speaker), d,
                        rng.next_u64()});
    if (other_budget > 1e-9) {
      std::vector<size_t> pool;
      for (size_t s = 0; s < corpus.size(); ++s)
        if (s != trial.labeled_speaker && s != trial.enroll_speaker)
          pool.push_back(s);
      const size_t n_contaminants = 1 + rng.index(2);
      std::vector<size_t> chosen;
      for (size_t k = 0; k < n_contaminants; ++k)
        chosen.push_back(pool[rng.index(pool.size())]);
      std::vector<double> durs = split_budget(other_budget, 0.4, 0.9, rng);
      for (size_t k = 0; k < durs.size(); ++k)
        pieces.push_back({static_cast<int>(chosen[k % chosen.size()]), durs[k],
                          rng.next_u64()});
    }
    for (size_t k = pieces.size(); k > 1; --k)
      std::swap(pieces[k - 1], pieces[rng.index(k)]);

    AudioBuffer& audio = trial.test_audio;
    audio.sample_rate = sr;
    double labeled_dur = 0.0, other_dur = 0.0;
    for (const Piece& piece : pieces) {
      if (rng.bernoulli(0.3)) {
        const size_t n = static_cast<size_t>(
            std::llround(rng.uniform(0.2, 0.5) * sr));
        SegmentInfo info;
        info.is_speech = false;
        info.speaker = -1;
        info.start = audio.samples.size();
        info.end = info.start + n;
        audio.samples.resize(audio.samples.size() + n, 0.0);
        trial.test_segments.push_back(info);
      }
      AudioBuffer utt = corpus.utterance(static_cast<size_t>(piece.speaker),
                                         piece.dur, piece.seed);
      SegmentInfo info;
      info.is_speech = true;
      info.speaker = piece.speaker;
      info.start = audio.samples.size();
      info.end = info.start + utt.samples.size();
      info.joined = !audio.samples.empty();
      audio.samples.insert(audio.samples.end(), utt.samples.begin(),
                           utt.samples.end());
      trial.test_segments.push_back(info);
      if (piece.speaker == static_cast<int>(trial.labeled_speaker))
        labeled_dur += utt.duration_s();
      else
        other_dur += utt.duration_s();
    }
    peak_normalize(audio);
    trial.measured_contamination =
        other_dur / std::max(labeled_dur + other_dur, 1e-12);
    set.trials.push_back(std::move(trial));
  }
  return set;
}

std::pair<double, double> compute_eer(const std::vector<double>& scores,
                                      const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("svvad: scores/labels size mismatch");
  size_t n_t = 0, n_n = 0;
  for (uint8_t l : labels) (l ? n_t : n_n) += 1;
  if (n_t == 0 || n_n == 0)
    throw std::invalid_argument("svvad: EER needs both classes present");

  // Candidate thresholds ascending; accept means score >= threshold. The
  // final candidate rejects everything so the miss-vs-fa crossing always
  // exists.
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);

  double prev_miss = 0.0, prev_fa = 0.0, prev_thr = 0.0;
  bool have_prev = false;
  for (double thr : thresholds) {
    size_t miss_n = 0, fa_n = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] && scores[i] < thr) ++miss_n;
      if (!labels[i] && scores[i] >= thr) ++fa_n;
    }
    const double miss = static_cast<double>(miss_n) / n_t;
    const double fa = static_cast<double>(fa_n) / n_n;
    if (miss >= fa) {
      if (!have_prev) return {miss, thr};  // crossing before the first point
      const double d0 = prev_miss - prev_fa;  // < 0
      const double d1 = miss - fa;            // >= 0
      const double t = (d1 - d0) > 0.0 ? -d0 / (d1 - d0) : 0.0;
      const double eer = prev_miss + t * (miss - prev_miss);
      const double threshold = prev_thr + t * (thr - prev_thr);
      return {eer, threshold};
    }
    prev_miss = miss;
    prev_fa = fa;
    prev_thr = thr;
    have_prev = true;
  }
  // miss never reached fa within the candidates: everything accepted at the
  // lowest thresholds and fa stays above miss -> EER at the top end.
  return {prev_fa, prev_thr};
}

double compute_min_dcf(const std::vector<double>& scores,
                       const std::vector<uint8_t>& labels, double p_target,
                       double c_fa, double c_miss) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("svvad: scores/labels size mismatch");
  size_t n_t = 0, n_n = 0;
  for (uint8_t l : labels) (l ? n_t : n_n) += 1;
  if (n_t == 0 || n_n == 0)
    throw std::invalid_argument("svvad: minDCF needs both classes present");

  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  // Reject-everything operating point.
  thresholds.push_back(thresholds.back() + 1.0);

  double best = std::numeric_limits<double>::infinity();
  for (double thr : thresholds) {
    size_t miss_n = 0, fa_n = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] && scores[i] < thr) ++miss_n;
      if (!labels[i] && scores[i] >= thr) ++fa_n;
    }
    const double miss = static_cast<double>(miss_n) / n_t;
    const double fa = static_cast<double>(fa_n) / n_n;
    best = std::min(best, c_miss * p_target * miss + c_fa * (1.0 - p_target) * fa);
  }
  return best / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

double EvalReport::mean_eer(double contamination) const {
  double acc = 0.0;
  size_t n = 0;
  for (const EvalRow& row : rows)
    if (row.contamination == contamination) {
      acc += row.eer;
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

double EvalReport::mean_min_dcf(double contamination) const {
  double acc = 0.0;
  size_t n = 0;
  for (const EvalRow& row : rows)
    if (row.contamination == contamination) {
      acc += row.min_dcf;
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

namespace {

Embedding embed_features(const EvalContext& ctx, const FeatureMatrix& feats) {
  return ctx.encoder->embed(feats);
}

}  // namespace

double score_trial(GateKind gate, const EvalContext& ctx, const Trial& trial) {
  const Embedding enroll =
      ctx.encoder->embed(logmel(trial.enroll_audio, ctx.mel));
  const FeatureMatrix feats = logmel(trial.test_audio, ctx.mel);

  Embedding test;
  switch (gate) {
    case GateKind::kNone: {
      test = embed_features(ctx, feats);
      break;
    }
    case GateKind::kEnergy: {
      auto mask = energy_vad(trial.test_audio, ctx.mel,
                             ctx.opts.energy_threshold_db);
      auto gated = gate_with_mask(feats, mask);
      test = embed_features(ctx, gated.has_value() ? *gated : feats);
      break;
    }
    case GateKind::kPvad: {
      if (ctx.pvad == nullptr)
        throw std::invalid_argument("svvad: pvad gate without a checkpoint");
      auto mask = ctx.pvad->mask(feats, enroll, ctx.opts.pvad_threshold);
      auto gated = gate_with_mask(feats, mask);
      test = embed_features(ctx, gated.has_value() ? *gated : feats);
      break;
    }
    case GateKind::kSvvad: {
      if (ctx.svvad == nullptr)
        throw std::invalid_argument("svvad: svvad gate without a checkpoint");
      Tensor x = Tensor::from_values(feats.T, feats.F, feats.values);
      Tensor v = Tensor::row(enroll.values);
      Tensor gated = ctx.svvad->forward(x, v).gated;
      Tensor e = ctx.encoder->embed(gated);
      test = Embedding{e.values()};
      break;
    }
  }
  return score(enroll, test);
}

EvalReport evaluate_gate(GateKind gate, const EvalContext& ctx) {
  if (ctx.corpus == nullptr || ctx.encoder == nullptr)
    throw std::invalid_argument("svvad: evaluation context incomplete");
  EvalReport report;
  for (size_t pi = 0; pi < ctx.opts.contamination.size(); ++pi) {
    const double P = ctx.opts.contamination[pi];
    for (size_t rep = 0; rep < ctx.opts.repeats; ++rep) {
      const uint64_t set_seed = mix_seed(ctx.opts.seed, pi * 1000 + rep);
      TrialSet set = build_trials(*ctx.corpus, P, ctx.opts.n_trials, set_seed,
                                  ctx.opts);
      std::vector<double> scores;
      std::vector<uint8_t> labels;
      scores.reserve(set.trials.size());
      for (const Trial& trial : set.trials) {
        scores.push_back(score_trial(gate, ctx, trial));
        labels.push_back(trial.target ? 1 : 0);
      }
      auto [eer, threshold] = compute_eer(scores, labels);
      EvalRow row;
      row.gate = gate_name(gate);
      row.contamination = P;
      row.repeat = rep;
      for (uint8_t l : labels) (l ? row.n_target : row.n_nontarget) += 1;
      row.eer = eer;
      row.min_dcf = compute_min_dcf(scores, labels);
      row.threshold = threshold;
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string report_csv(const EvalReport& report,
                       const SpeakerEncoder& encoder) {
  std::ostringstream out;
  out.precision(17);
  out << "# encoder_seed=" << encoder.config().seed
      << " encoder_feat_dim=" << encoder.config().feat_dim
      << " encoder_embed_dim=" << encoder.config().embed_dim << "\n";
  out << "gate,P,repeat,n_target,n_nontarget,eer,min_dcf,threshold\n";
  for (const EvalRow& row : report.rows)
    out << row.gate << "," << row.contamination << "," << row.repeat << ","
        << row.n_target << "," << row.n_nontarget << "," << row.eer << ","
        << row.min_dcf << "," << row.threshold << "\n";
  return out.str();
}

void write_report_csv(const std::string& path, const EvalReport& report,
                      const SpeakerEncoder& encoder) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("svvad: cannot open for write: " + path);
  f << report_csv(report, encoder);
}

namespace {

std::vector<FrameClass> trial_labels(const EvalContext& ctx,
                                     const Trial& trial) {
  return frame_labels(trial.test_segments,
                      static_cast<int>(trial.labeled_speaker),
                      trial.test_audio.size(), trial.test_audio.sample_rate,
                      ctx.mel);
}

VadDecision trial_decision(const SvvadModel& model, const EvalContext& ctx,
                           const Trial& trial) {
  const Embedding enroll =
      ctx.encoder->embed(logmel(trial.enroll_audio, ctx.mel));
  const FeatureMatrix feats = logmel(trial.test_audio, ctx.mel);
  return model.decide(feats, enroll);
}

}  // namespace

std::string decisions_csv(const SvvadModel& model, const EvalContext& ctx,
                          const Trial& trial) {
  const VadDecision decision = trial_decision(model, ctx, trial);
  const std::vector<FrameClass> labels = trial_labels(ctx, trial);
  std::ostringstream out;
  out.precision(17);
  out << "frame_idx,time_s,gamma,beta,label\n";
  for (size_t t = 0; t < decision.gamma.size(); ++t)
    out << t << "," << t * ctx.mel.hop_s << "," << decision.gamma[t] << ","
        << decision.beta[t] << "," << frame_class_name(labels[t]) << "\n";
  return out.str();
}

std::optional<double> gamma_direction(const SvvadModel& model,
                                      const EvalContext& ctx,
                                      const Trial& trial) {
  const VadDecision decision = trial_decision(model, ctx, trial);
  const std::vector<FrameClass> labels = trial_labels(ctx, trial);
  double tss_sum = 0.0, ntss_sum = 0.0;
  size_t tss_n = 0, ntss_n = 0;
  for (size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == FrameClass::kTss) {
      tss_sum += decision.gamma[t];
      ++tss_n;
    } else if (labels[t] == FrameClass::kNtss) {
      ntss_sum += decision.gamma[t];
      ++ntss_n;
    }
  }
  if (tss_n == 0 || ntss_n == 0) return std::nullopt;
  return tss_sum / tss_n - ntss_sum / ntss_n;
}

std::string embeddings_csv(GateKind gate, const EvalContext& ctx,
                           const std::vector<TrialSet>& sets) {
  std::ostringstream out;
  out.precision(17);
  out << "utt_id,speaker,P,target";
  const size_t e_dim = ctx.encoder->config().embed_dim;
  for (size_t i = 0; i < e_dim; ++i) out << ",e" << i;
  out << "\n";
  size_t utt_id = 0;
  for (const TrialSet& set : sets) {
    for (const Trial& trial : set.trials) {
      const Embedding enroll =
          ctx.encoder->embed(logmel(trial.enroll_audio, ctx.mel));
      const FeatureMatrix feats = logmel(trial.test_audio, ctx.mel);
      Embedding emb;
      if (gate == GateKind::kSvvad) {
        if (ctx.svvad == nullptr)
          throw std::invalid_argument("svvad: svvad gate without a checkpoint");
        Tensor x = Tensor::from_values(feats.T, feats.F, feats.values);
        Tensor v = Tensor::row(enroll.values);
        Tensor e = ctx.encoder->embed(ctx.svvad->forward(x, v).gated);
        emb = Embedding{e.values()};
      } else {
        emb = ctx.encoder->embed(feats);
      }
      out << utt_id++ << "," << trial.labeled_speaker << ","
          << set.contamination << "," << (trial.target ? 1 : 0);
      for (double v : emb.values) out << "," << v;
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace svvad
