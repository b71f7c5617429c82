#include "svvad/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "svvad/checkpoint.hpp"
#include "svvad/rng.hpp"

namespace svvad {

TrainStageConfig TrainStageConfig::paper_stage1() { return TrainStageConfig{}; }

TrainStageConfig TrainStageConfig::paper_stage2() {
  TrainStageConfig cfg;
  cfg.stage = 2;
  cfg.optimizer = Optim::kAdamW;
  cfg.lr = 1e-4;
  cfg.weight_decay = 2e-5;
  cfg.anchor_s = 8.0;
  cfg.positive_s = 12.0;
  cfg.negative_s = 12.0;
  cfg.batch_size = 8;
  cfg.grad_accum = 8;  // effective batch 64
  cfg.steps = 200;
  return cfg;
}

TrainStageConfig TrainStageConfig::desk_stage1() {
  TrainStageConfig cfg;
  cfg.anchor_s = 2.0;
  cfg.positive_s = 3.0;
  cfg.negative_s = 3.0;
  cfg.batch_size = 2;
  cfg.grad_accum = 2;  // effective batch 4
  cfg.steps = 300;
  return cfg;
}

TrainStageConfig TrainStageConfig::desk_stage2() {
  TrainStageConfig cfg = desk_stage1();
  cfg.stage = 2;
  cfg.optimizer = Optim::kAdamW;
  cfg.lr = 1e-4;
  cfg.weight_decay = 2e-5;
  cfg.anchor_s = 3.0;
  cfg.positive_s = 4.0;
  cfg.negative_s = 4.0;
  cfg.steps = 200;
  return cfg;
}

namespace {

std::unique_ptr<Optimizer> make_optimizer(const TrainStageConfig& cfg) {
  if (cfg.optimizer == TrainStageConfig::Optim::kSgd)
    return std::make_unique<SgdOptimizer>(cfg.lr, cfg.momentum,
                                          cfg.weight_decay);
  return std::make_unique<AdamWOptimizer>(cfg.lr, cfg.weight_decay);
}

}  // namespace

Trainer::Trainer(SvvadModel& model, const SpeakerEncoder& encoder,
                 const SpeakerCorpus& corpus, TrainerOptions opts,
                 TrainStageConfig stage1, TrainStageConfig stage2)
    : model_(model),
      encoder_(encoder),
      corpus_(corpus),
      opts_(std::move(opts)),
      stage1_(stage1),
      stage2_(stage2) {
  if (!opts_.out_dir.empty())
    std::filesystem::create_directories(opts_.out_dir);
}

const TrainStageConfig& Trainer::current_stage() const {
  return stage_index(global_step_) == 0 ? stage1_ : stage2_;
}

void Trainer::ensure_optimizer() {
  const int idx = stage_index(global_step_);
  if (optimizer_stage_ != idx) {
    // The optimizer is switched between stages, with fresh state.
    optimizer_ = make_optimizer(idx == 0 ? stage1_ : stage2_);
    optimizer_stage_ = idx;
  }
}

double Trainer::accumulate_gradients(const TrainStageConfig& cfg,
                                     size_t global_step) {
  GenPolicy policy = opts_.policy;
  policy.anchor_s = cfg.anchor_s;
  policy.positive_s = cfg.positive_s;
  policy.negative_s = cfg.negative_s;

  double loss_sum = 0.0;
  for (size_t micro = 0; micro < cfg.grad_accum; ++micro) {
    std::vector<Tensor> anchors, positives, negatives;
    std::vector<uint64_t> batch_seeds;
    for (size_t i = 0; i < cfg.batch_size; ++i) {
      const uint64_t sample_index =
          (global_step * cfg.grad_accum + micro) * cfg.batch_size + i;
      const uint64_t seed = mix_seed(opts_.seed ^ 0xd5a7a90ULL, sample_index);
      batch_seeds.push_back(seed);
      TripletSample triplet = generate_triplet(policy, corpus_, seed);

      // Anchors are clean single-speaker enrollments; they bypass the gate
      // and carry no gradient.
      FeatureMatrix fa = logmel(triplet.anchor, opts_.mel);
      Tensor xa = Tensor::from_values(fa.T, fa.F, std::move(fa.values));
      Tensor va = encoder_.embed(xa);

      FeatureMatrix fp = logmel(triplet.positive, opts_.mel);
      Tensor xp = Tensor::from_values(fp.T, fp.F, std::move(fp.values));
      Tensor vp = encoder_.embed(model_.forward(xp, va).gated);

      FeatureMatrix fn = logmel(triplet.negative, opts_.mel);
      Tensor xn = Tensor::from_values(fn.T, fn.F, std::move(fn.values));
      Tensor vn = encoder_.embed(model_.forward(xn, va).gated);

      anchors.push_back(va);
      positives.push_back(vp);
      negatives.push_back(vn);
    }
    TripletEmbeddings batch{concat_rows(anchors), concat_rows(positives),
                            concat_rows(negatives)};
    Tensor loss = triplet_loss(batch, opts_.loss);
    const double value = loss.scalar_value();
    bool finite = std::isfinite(value);
    for (const Tensor* t : {&batch.anchor, &batch.positive, &batch.negative})
      for (double v : t->values())
        if (!std::isfinite(v)) finite = false;
    if (!finite) {
      std::ostringstream msg;
      msg << "svvad: non-finite loss or embeddings at step " << global_step
          << "; batch seeds:";
      for (uint64_t s : batch_seeds) msg << " " << s;
      throw std::runtime_error(msg.str());
    }
    backward(loss);
    loss_sum += value;
  }
  return loss_sum / static_cast<double>(cfg.grad_accum);
}

double Trainer::train_step() {
  ensure_optimizer();
  const TrainStageConfig& cfg = current_stage();
  const double loss = accumulate_gradients(cfg, global_step_);
  optimizer_->step(model_.params());
  model_.params().zero_grads();
  ++global_step_;
  loss_history_.emplace_back(global_step_, loss);

  if (!opts_.out_dir.empty() && opts_.checkpoint_every > 0 &&
      global_step_ % opts_.checkpoint_every == 0)
    save_checkpoint(opts_.out_dir + "/checkpoint_step" +
                    std::to_string(global_step_) + ".bin");
  return loss;
}

void Trainer::run() {
  const size_t total = stage1_.steps + stage2_.steps;
  while (global_step_ < total) train_step();
  if (!opts_.out_dir.empty()) {
    save_checkpoint(opts_.out_dir + "/checkpoint.bin");
    std::ofstream csv(opts_.out_dir + "/loss.csv");
    csv << "step,variant,value\n";
    for (const auto& [step, value] : loss_history_)
      csv << step << "," << loss_variant_name(opts_.loss.variant) << ","
          << value << "\n";
  }
}

std::string Trainer::metadata_json() const {
  nlohmann::json meta;
  meta["global_step"] = global_step_;
  meta["stage"] = stage_index(global_step_) + 1;
  meta["seed"] = opts_.seed;
  meta["loss"] = {{"variant", loss_variant_name(opts_.loss.variant)},
                  {"alpha", opts_.loss.alpha},
                  {"alpha_secondary", opts_.loss.alpha_secondary},
                  {"xi", opts_.loss.xi},
                  {"orientation",
                   opts_.loss.orientation == CccOrientation::kLiteral
                       ? "literal"
                       : "similarity-consistent"}};
  meta["encoder"] = {{"feat_dim", encoder_.config().feat_dim},
                     {"embed_dim", encoder_.config().embed_dim},
                     {"seed", encoder_.config().seed}};
  const BackboneConfig& b = model_.config();
  meta["backbone"] = {{"feat_dim", b.feat_dim},
                      {"conformer_dim", b.conformer_dim},
                      {"n_conf", b.n_conf},
                      {"n_trans", b.n_trans},
                      {"ffn_dim", b.ffn_dim},
                      {"n_heads", b.n_heads},
                      {"conv_kernel", b.conv_kernel},
                      {"embed_dim", b.embed_dim},
                      {"embed_reduced", b.embed_reduced}};
  meta["corpus"] = {{"n_speakers", corpus_.size()}, {"seed", corpus_.seed()}};
  auto stage_json = [](const TrainStageConfig& s) {
    return nlohmann::json{
        {"optimizer",
         s.optimizer == TrainStageConfig::Optim::kSgd ? "sgd" : "adamw"},
        {"lr", s.lr},
        {"momentum", s.momentum},
        {"weight_decay", s.weight_decay},
        {"anchor_s", s.anchor_s},
        {"positive_s", s.positive_s},
        {"negative_s", s.negative_s},
        {"batch_size", s.batch_size},
        {"grad_accum", s.grad_accum},
        {"steps", s.steps}};
  };
  meta["stage1"] = stage_json(stage1_);
  meta["stage2"] = stage_json(stage2_);
  return meta.dump(2);
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::vector<TensorBlob> blobs = store_blobs(model_.params());
  if (optimizer_) {
    std::vector<TensorBlob> opt = optimizer_->state_blobs(model_.params());
    blobs.insert(blobs.end(), opt.begin(), opt.end());
  }
  write_checkpoint(path, blobs);
  write_metadata(path, metadata_json());
}

void Trainer::resume(const std::string& path) {
  const std::vector<TensorBlob> blobs = read_checkpoint(path);
  load_store_blobs(model_.params(), blobs);
  const nlohmann::json meta = nlohmann::json::parse(read_metadata(path));
  global_step_ = meta.at("global_step").get<size_t>();
  optimizer_stage_ = -1;
  if (global_step_ < stage1_.steps + stage2_.steps) {
    ensure_optimizer();
    optimizer_->load_state(blobs);
  }
  loss_history_.clear();
}

}  // namespace svvad
