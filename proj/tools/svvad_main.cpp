#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "svvad/checkpoint.hpp"
#include "svvad/config.hpp"
#include "svvad/eval.hpp"
#include "svvad/rng.hpp"
#include "svvad/trainer.hpp"

namespace fs = std::filesystem;
using namespace svvad;

namespace {

struct Setup {
  KeyValueConfig cfg;
  MelConfig mel;
  EncoderConfig encoder_cfg;
  BackboneConfig backbone;
  GenPolicy policy;
  LossConfig loss;
  TrainStageConfig stage1, stage2;
  EvalOptions eval_opts;
  size_t n_speakers = 20;
  uint64_t corpus_seed = 11;
  size_t pvad_steps = 600;
  double pvad_lr = 3e-3;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string token;
  std::istringstream ss(text);
  while (std::getline(ss, token, ',')) out.push_back(std::stod(token));
  return out;
}

TrainStageConfig load_stage(const KeyValueConfig& cfg, const std::string& key,
                            TrainStageConfig base) {
  const std::string optim = cfg.get(key + ".optimizer",
                                    base.optimizer == TrainStageConfig::Optim::kSgd
                                        ? std::string("sgd")
                                        : std::string("adamw"));
  base.optimizer = optim == "sgd" ? TrainStageConfig::Optim::kSgd
                                  : TrainStageConfig::Optim::kAdamW;
  base.lr = cfg.get(key + ".lr", base.lr);
  base.momentum = cfg.get(key + ".momentum", base.momentum);
  base.weight_decay = cfg.get(key + ".weight_decay", base.weight_decay);
  base.anchor_s = cfg.get(key + ".anchor_s", base.anchor_s);
  base.positive_s = cfg.get(key + ".positive_s", base.positive_s);
  base.negative_s = cfg.get(key + ".negative_s", base.negative_s);
  base.batch_size = cfg.get(key + ".batch_size", base.batch_size);
  base.grad_accum = cfg.get(key + ".grad_accum", base.grad_accum);
  base.steps = cfg.get(key + ".steps", base.steps);
  return base;
}

Setup load_setup(const std::string& config_path) {
  Setup s;
  s.cfg = config_path.empty()
              ? KeyValueConfig::from_string(default_config_text())
              : KeyValueConfig::from_file(config_path);
  const KeyValueConfig& cfg = s.cfg;

  s.n_speakers = cfg.get("corpus.n_speakers", static_cast<size_t>(20));
  s.corpus_seed = cfg.get_u64("corpus.seed", 11);

  s.mel.n_mels = cfg.get("mel.n_mels", static_cast<size_t>(40));
  s.mel.win_s = cfg.get("mel.win_s", 0.025);
  s.mel.hop_s = cfg.get("mel.hop_s", 0.010);
  s.mel.fmin_hz = cfg.get("mel.fmin_hz", 20.0);
  s.mel.fmax_hz = cfg.get("mel.fmax_hz", 7600.0);
  s.mel.cmvn = cfg.get("mel.cmvn", false);

  s.encoder_cfg.feat_dim = s.mel.n_mels;
  s.encoder_cfg.embed_dim = cfg.get("encoder.embed_dim", static_cast<size_t>(32));
  s.encoder_cfg.seed = cfg.get_u64("encoder.seed", 6060842);

  s.backbone = BackboneConfig::desk();
  s.backbone.feat_dim = s.mel.n_mels;
  s.backbone.conformer_dim =
      cfg.get("backbone.conformer_dim", s.backbone.conformer_dim);
  s.backbone.n_conf = cfg.get("backbone.n_conf", s.backbone.n_conf);
  s.backbone.n_trans = cfg.get("backbone.n_trans", s.backbone.n_trans);
  s.backbone.ffn_dim = cfg.get("backbone.ffn_dim", s.backbone.ffn_dim);
  s.backbone.n_heads = cfg.get("backbone.n_heads", s.backbone.n_heads);
  s.backbone.conv_kernel = cfg.get("backbone.conv_kernel", s.backbone.conv_kernel);
  s.backbone.embed_dim = s.encoder_cfg.embed_dim;
  s.backbone.embed_reduced =
      cfg.get("backbone.embed_reduced", s.backbone.embed_reduced);
  s.backbone.gamma_sigmoid = cfg.get("backbone.gamma_sigmoid", false);

  s.policy.p_spk = cfg.get("policy.p_spk", 0.9);
  s.policy.p_overlap = cfg.get("policy.p_overlap", 0.3);
  s.policy.max_speakers = cfg.get("policy.max_speakers", static_cast<size_t>(3));
  s.policy.augment = cfg.get("policy.augment", true);
  s.policy.augment_prob = cfg.get("policy.augment_prob", 0.5);
  s.policy.snr_lo_db = cfg.get("policy.snr_lo_db", 10.0);
  s.policy.snr_hi_db = cfg.get("policy.snr_hi_db", 30.0);

  s.loss.variant = loss_variant_from_string(
      cfg.get("loss.variant", std::string("tlccos+tlccc")));
  LossConfig defaults = LossConfig::for_variant(s.loss.variant);
  s.loss.alpha = cfg.get("loss.alpha", defaults.alpha);
  s.loss.alpha_secondary =
      cfg.get("loss.alpha_secondary", defaults.alpha_secondary);
  s.loss.xi = cfg.get("loss.xi", defaults.xi);
  s.loss.orientation =
      cfg.get("loss.orientation", std::string("similarity-consistent")) ==
              "literal"
          ? CccOrientation::kLiteral
          : CccOrientation::kSimilarityConsistent;

  s.stage1 = load_stage(cfg, "train1", TrainStageConfig::desk_stage1());
  s.stage2 = load_stage(cfg, "train2", TrainStageConfig::desk_stage2());

  s.eval_opts.contamination =
      parse_list(cfg.get("eval.contamination", std::string("0,0.3,0.5,0.7")));
  s.eval_opts.n_trials = cfg.get("eval.n_trials", static_cast<size_t>(200));
  s.eval_opts.repeats = cfg.get("eval.repeats", static_cast<size_t>(3));
  s.eval_opts.enroll_s = cfg.get("eval.enroll_s", 2.0);
  s.eval_opts.speech_budget_s = cfg.get("eval.speech_budget_s", 2.5);
  s.eval_opts.energy_threshold_db = cfg.get("eval.energy_threshold_db", 10.0);
  s.eval_opts.pvad_threshold = cfg.get("eval.pvad_threshold", 0.5);

  s.pvad_steps = cfg.get("pvad.steps", static_cast<size_t>(600));
  s.pvad_lr = cfg.get("pvad.lr", 3e-3);
  return s;
}

void load_model_checkpoint(SvvadModel& model, const std::string& path) {
  load_store_blobs(model.params(), read_checkpoint(path));
}

void load_pvad_checkpoint(PvadModel& model, const std::string& path) {
  load_store_blobs(model.params(), read_checkpoint(path));
}

int cmd_synth_corpus(const Setup& s, const std::string& out_dir,
                     size_t utts_per_speaker, double duration_s,
                     uint64_t seed) {
  fs::create_directories(out_dir);
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  std::ofstream manifest(out_dir + "/manifest.csv");
  manifest << "utt_id,speaker_id,duration_s,path,seed\n";
  size_t utt_id = 0;
  for (size_t spk = 0; spk < corpus.size(); ++spk) {
    for (size_t u = 0; u < utts_per_speaker; ++u) {
      const uint64_t utt_seed = mix_seed(seed, utt_id);
      AudioBuffer audio = corpus.utterance(spk, duration_s, utt_seed);
      const std::string name =
          "spk" + std::to_string(spk) + "_utt" + std::to_string(u) + ".wav";
      write_wav(out_dir + "/" + name, audio);
      manifest << utt_id << "," << spk << "," << duration_s << "," << name
               << "," << utt_seed << "\n";
      ++utt_id;
    }
  }
  std::cout << "wrote " << utt_id << " utterances to " << out_dir << "\n";
  return 0;
}

int cmd_gen_triplets(const Setup& s, const std::string& out_dir, size_t count,
                     uint64_t seed) {
  fs::create_directories(out_dir);
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  GenPolicy policy = s.policy;
  policy.anchor_s = s.stage1.anchor_s;
  policy.positive_s = s.stage1.positive_s;
  policy.negative_s = s.stage1.negative_s;

  std::ofstream manifest(out_dir + "/triplets.csv");
  manifest << "triplet_id,role,path,speakers,seed\n";
  for (size_t i = 0; i < count; ++i) {
    const uint64_t tseed = mix_seed(seed, i);
    TripletSample t = generate_triplet(policy, corpus, tseed);
    auto dump = [&](const char* role, const AudioBuffer& audio,
                    const std::set<int>& speakers) {
      const std::string name =
          "triplet" + std::to_string(i) + "_" + role + ".wav";
      write_wav(out_dir + "/" + name, audio);
      manifest << i << "," << role << "," << name << ",";
      bool first = true;
      for (int spk : speakers) {
        if (!first) manifest << ";";
        manifest << spk;
        first = false;
      }
      manifest << "," << tseed << "\n";
    };
    dump("anchor", t.anchor, {t.anchor_speaker});
    dump("positive", t.positive, t.positive_speakers);
    dump("negative", t.negative, t.negative_speakers);

    for (const auto& [role, segments, audio] :
         {std::tuple{"positive", &t.positive_segments, &t.positive},
          std::tuple{"negative", &t.negative_segments, &t.negative}}) {
      auto labels = frame_labels(*segments, t.anchor_speaker, audio->size(),
                                 audio->sample_rate, s.mel);
      std::ofstream lf(out_dir + "/triplet" + std::to_string(i) + "_" + role +
                       "_labels.csv");
      lf << "frame_idx,label\n";
      for (size_t f = 0; f < labels.size(); ++f)
        lf << f << "," << frame_class_name(labels[f]) << "\n";
    }
  }
  std::cout << "wrote " << count << " triplets to " << out_dir << "\n";
  return 0;
}

int cmd_train(const Setup& s, const std::string& out_dir, uint64_t seed,
              const std::string& resume_path) {
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  SpeakerEncoder encoder(s.encoder_cfg);
  SvvadModel model(s.backbone, mix_seed(seed, 0x6d6fULL));

  TrainerOptions opts;
  opts.seed = seed;
  opts.loss = s.loss;
  opts.policy = s.policy;
  opts.mel = s.mel;
  opts.out_dir = out_dir;
  opts.checkpoint_every = s.cfg.get("train.checkpoint_every",
                                    static_cast<size_t>(0));
  Trainer trainer(model, encoder, corpus, opts, s.stage1, s.stage2);
  if (!resume_path.empty()) trainer.resume(resume_path);
  trainer.run();
  std::cout << "trained " << trainer.global_step() << " steps; checkpoint at "
            << out_dir << "/checkpoint.bin\n";
  return 0;
}

int cmd_train_pvad(const Setup& s, const std::string& out_dir, uint64_t seed) {
  fs::create_directories(out_dir);
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  SpeakerEncoder encoder(s.encoder_cfg);
  PvadModel model(s.backbone, mix_seed(seed, 0x7076ULL));

  GenPolicy policy = s.policy;
  policy.anchor_s = s.stage1.anchor_s;
  policy.positive_s = s.stage1.positive_s;
  policy.negative_s = s.stage1.negative_s;

  PvadTrainReport report = pvad_train(model, encoder, corpus, policy, s.mel,
                                      s.pvad_steps, s.pvad_lr, seed);
  const std::string path = out_dir + "/pvad_checkpoint.bin";
  write_checkpoint(path, store_blobs(model.params()));
  write_metadata(path, "{\"steps\": " + std::to_string(report.steps) + "}");
  std::ofstream csv(out_dir + "/pvad_loss.csv");
  csv << "step,variant,value\n";
  for (size_t i = 0; i < report.losses.size(); ++i)
    csv << i + 1 << ",bce," << report.losses[i] << "\n";
  std::cout << "pvad checkpoint at " << path << "\n";
  return 0;
}

int cmd_eval(const Setup& s, const std::string& out_dir,
             const std::string& gate_str, const std::string& checkpoint,
             const std::string& pvad_checkpoint, uint64_t seed) {
  fs::create_directories(out_dir);
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  SpeakerEncoder encoder(s.encoder_cfg);

  EvalContext ctx;
  ctx.corpus = &corpus;
  ctx.encoder = &encoder;
  ctx.mel = s.mel;
  ctx.opts = s.eval_opts;
  ctx.opts.seed = seed;

  const GateKind gate = gate_from_string(gate_str);
  SvvadModel model(s.backbone, 0);
  PvadModel pvad(s.backbone, 0);
  if (gate == GateKind::kSvvad) {
    if (checkpoint.empty())
      throw std::runtime_error("svvad: --checkpoint required for gate=svvad");
    load_model_checkpoint(model, checkpoint);
    ctx.svvad = &model;
  }
  if (gate == GateKind::kPvad) {
    if (pvad_checkpoint.empty())
      throw std::runtime_error(
          "svvad: --pvad-checkpoint required for gate=pvad");
    load_pvad_checkpoint(pvad, pvad_checkpoint);
    ctx.pvad = &pvad;
  }

  EvalReport report = evaluate_gate(gate, ctx);
  const std::string path = out_dir + "/report_" + gate_str + ".csv";
  write_report_csv(path, report, encoder);
  for (double P : ctx.opts.contamination)
    std::printf("gate=%s P=%.2f mean EER=%.4f mean minDCF=%.4f\n",
                gate_str.c_str(), P, report.mean_eer(P),
                report.mean_min_dcf(P));
  std::cout << "report at " << path << "\n";
  return 0;
}

int cmd_gradcheck(const Setup& s) {
  // Small-shape finite-difference sweep over every loss and the backbone.
  Rng rng(12345);
  auto random_tensor = [&](size_t r, size_t c) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor::from_values(r, c, std::move(v), true);
  };
  auto fd_check = [&](const std::vector<Tensor>& leaves,
                      const std::function<Tensor()>& make_loss) {
    for (auto leaf : leaves) leaf.zero_grad();
    backward(make_loss());
    double max_diff = 0.0, max_fd = 0.0;
    for (auto leaf : leaves) {
      const auto analytic =
          leaf.has_grad() ? leaf.grad() : std::vector<double>(leaf.size(), 0.0);
      for (int k = 0; k < 20; ++k) {
        const size_t i = rng.index(leaf.size());
        const double h = 1e-4;
        const double orig = leaf.mutable_values()[i];
        leaf.mutable_values()[i] = orig + h;
        const double fp = make_loss().scalar_value();
        leaf.mutable_values()[i] = orig - h;
        const double fm = make_loss().scalar_value();
        leaf.mutable_values()[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        max_diff = std::max(max_diff, std::fabs(analytic[i] - fd));
        max_fd = std::max(max_fd, std::fabs(fd));
      }
    }
    return max_diff / (max_fd + 1e-8);
  };

  int failures = 0;
  for (LossVariant variant :
       {LossVariant::kTl, LossVariant::kTlCos, LossVariant::kTlCcc,
        LossVariant::kTlCcos, LossVariant::kTlCosPlusTl,
        LossVariant::kTlCcosPlusTlCcc}) {
    LossConfig cfg = LossConfig::for_variant(variant);
    TripletEmbeddings e{random_tensor(4, 6), random_tensor(4, 6),
                        random_tensor(4, 6)};
    const double err = fd_check({e.anchor, e.positive, e.negative},
                                [&] { return triplet_loss(e, cfg); });
    const bool ok = err < 1e-4;
    failures += !ok;
    std::printf("loss %-14s rel_err %.3e %s\n",
                loss_variant_name(variant).c_str(), err, ok ? "ok" : "FAIL");
  }

  BackboneConfig bb;
  bb.feat_dim = 8;
  bb.conformer_dim = 8;
  bb.n_conf = 1;
  bb.n_trans = 1;
  bb.ffn_dim = 8;
  bb.n_heads = 2;
  bb.conv_kernel = 3;
  bb.embed_dim = 8;
  bb.embed_reduced = 4;
  SvvadModel model(bb, 99);
  Tensor x = random_tensor(5, 8);
  x = Tensor::from_values(5, 8, x.values(), false);
  Tensor v = Tensor::from_values(1, 8, random_tensor(1, 8).values(), false);
  Tensor target = Tensor::from_values(5, 8, random_tensor(5, 8).values(), false);
  std::vector<Tensor> leaves;
  for (const auto& p : model.params().parameters()) leaves.push_back(p.tensor);
  const double err = fd_check(leaves, [&] {
    auto out = model.forward(x, v);
    Tensor d = sub(out.gated, target);
    return mean_all(mul(d, d));
  });
  const bool ok = err < 1e-4;
  failures += !ok;
  std::printf("backbone       rel_err %.3e %s\n", err, ok ? "ok" : "FAIL");
  (void)s;
  return failures == 0 ? 0 : 1;
}

int cmd_export_decisions(const Setup& s, const std::string& out_dir,
                         const std::string& checkpoint, double contamination,
                         size_t trial_index, uint64_t seed) {
  fs::create_directories(out_dir);
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  SpeakerEncoder encoder(s.encoder_cfg);
  SvvadModel model(s.backbone, 0);
  load_model_checkpoint(model, checkpoint);

  EvalContext ctx;
  ctx.corpus = &corpus;
  ctx.encoder = &encoder;
  ctx.mel = s.mel;
  ctx.opts = s.eval_opts;
  ctx.svvad = &model;

  TrialSet set = build_trials(corpus, contamination,
                              std::max<size_t>(trial_index + 1, 8),
                              mix_seed(seed, 0xdecULL), ctx.opts);
  const std::string path = out_dir + "/decisions.csv";
  std::ofstream f(path);
  f << decisions_csv(model, ctx, set.trials.at(trial_index));
  std::cout << "decisions at " << path << "\n";
  return 0;
}

int cmd_export_embeddings(const Setup& s, const std::string& out_dir,
                          const std::string& gate_str,
                          const std::string& checkpoint, uint64_t seed) {
  fs::create_directories(out_dir);
  SpeakerCorpus corpus(s.n_speakers, s.corpus_seed);
  SpeakerEncoder encoder(s.encoder_cfg);
  SvvadModel model(s.backbone, 0);

  EvalContext ctx;
  ctx.corpus = &corpus;
  ctx.encoder = &encoder;
  ctx.mel = s.mel;
  ctx.opts = s.eval_opts;
  const GateKind gate = gate_from_string(gate_str);
  if (gate == GateKind::kSvvad) {
    if (checkpoint.empty())
      throw std::runtime_error("svvad: --checkpoint required for gate=svvad");
    load_model_checkpoint(model, checkpoint);
    ctx.svvad = &model;
  }

  std::vector<TrialSet> sets;
  for (size_t pi = 0; pi < ctx.opts.contamination.size(); ++pi)
    sets.push_back(build_trials(corpus, ctx.opts.contamination[pi],
                                std::min<size_t>(ctx.opts.n_trials, 50),
                                mix_seed(seed, 0xe6b + pi), ctx.opts));
  const std::string path = out_dir + "/embeddings_" + gate_str + ".csv";
  std::ofstream f(path);
  f << embeddings_csv(gate, ctx, sets);
  std::cout << "embeddings at " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-verification-driven soft voice activity gate"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 1;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed, "run seed");

  auto* synth = app.add_subcommand("synth-corpus", "write speaker WAVs + manifest");
  size_t utts = 10;
  double duration = 2.0;
  synth->add_option("--utts-per-speaker", utts);
  synth->add_option("--duration", duration);

  auto* gen = app.add_subcommand("gen-triplets", "write triplet WAVs, labels, manifest");
  size_t count = 10;
  gen->add_option("--count", count);

  auto* train = app.add_subcommand("train", "two-stage gate training");
  std::string resume_path;
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  app.add_subcommand("train-pvad", "supervised frame-classifier baseline");

  auto* eval_cmd = app.add_subcommand("eval", "score trials, write EER/minDCF report");
  std::string gate = "none";
  std::string checkpoint, pvad_checkpoint;
  eval_cmd->add_option("--gate", gate, "none | energy | pvad | svvad");
  eval_cmd->add_option("--checkpoint", checkpoint);
  eval_cmd->add_option("--pvad-checkpoint", pvad_checkpoint);

  app.add_subcommand("gradcheck", "finite-difference gradient sweep");

  auto* dec = app.add_subcommand("export-decisions", "per-frame gamma/beta CSV");
  std::string dec_checkpoint;
  double dec_P = 0.5;
  size_t trial_index = 0;
  dec->add_option("--checkpoint", dec_checkpoint)->required();
  dec->add_option("--P", dec_P);
  dec->add_option("--trial-index", trial_index);

  auto* emb = app.add_subcommand("export-embeddings", "gated embeddings CSV");
  std::string emb_gate = "none";
  std::string emb_checkpoint;
  emb->add_option("--gate", emb_gate);
  emb->add_option("--checkpoint", emb_checkpoint);

  CLI11_PARSE(app, argc, argv);

  try {
    Setup setup = load_setup(config_path);
    if (synth->parsed())
      return cmd_synth_corpus(setup, out_dir, utts, duration, seed);
    if (gen->parsed()) return cmd_gen_triplets(setup, out_dir, count, seed);
    if (train->parsed()) return cmd_train(setup, out_dir, seed, resume_path);
    if (app.get_subcommand("train-pvad")->parsed())
      return cmd_train_pvad(setup, out_dir, seed);
    if (eval_cmd->parsed())
      return cmd_eval(setup, out_dir, gate, checkpoint, pvad_checkpoint, seed);
    if (app.get_subcommand("gradcheck")->parsed()) return cmd_gradcheck(setup);
    if (dec->parsed())
      return cmd_export_decisions(setup, out_dir, dec_checkpoint, dec_P,
                                  trial_index, seed);
    if (emb->parsed())
      return cmd_export_embeddings(setup, out_dir, emb_gate, emb_checkpoint,
                                   seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
