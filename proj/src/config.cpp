#include "svvad/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace svvad {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("svvad: cannot open config: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream stream(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(stream, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("svvad: config line " + std::to_string(lineno) +
                               " is not key=value: " + line);
    cfg.kv_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
  return kv_.count(key) > 0;
}

std::string KeyValueConfig::get(const std::string& key,
                                const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double KeyValueConfig::get(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : std::stod(it->second);
}

size_t KeyValueConfig::get(const std::string& key, size_t fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback
                         : static_cast<size_t>(std::stoull(it->second));
}

uint64_t KeyValueConfig::get_u64(const std::string& key,
                                 uint64_t fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : std::stoull(it->second);
}

bool KeyValueConfig::get(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("svvad: config key " + key +
                           " is not a boolean: " + it->second);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

std::string default_config_text() {
  return R"(# svvad configuration: key = value, '#' starts a comment.
# Desk-scale values are active; the reported full-scale values appear as
# comments beside each key.

# --- corpus ---
corpus.n_speakers = 20
corpus.seed = 11

# --- features ---
mel.n_mels = 40              # full-scale speaker stacks commonly use 80
mel.win_s = 0.025
mel.hop_s = 0.010
mel.fmin_hz = 20
mel.fmax_hz = 7600
mel.cmvn = false

# --- speaker encoder (frozen) ---
encoder.embed_dim = 32       # reported: E = 192
encoder.seed = 6060842

# --- backbone ---
backbone.conformer_dim = 40  # reported conformer encoder size: 256
backbone.n_conf = 2          # reported: N_conf = 4
backbone.n_trans = 2         # reported: N_trans = 3
backbone.ffn_dim = 64        # reported feed-forward size: 256
backbone.n_heads = 2
backbone.conv_kernel = 7
backbone.embed_reduced = 16  # reported: E' = 64
backbone.gamma_sigmoid = false

# --- data generation policy ---
policy.p_spk = 0.9           # reported: p_spk = 0.9
policy.p_overlap = 0.3       # reported: p_overlap = 0.3
policy.max_speakers = 3
policy.augment = true
policy.augment_prob = 0.5
policy.snr_lo_db = 10        # reported range: 10 dB
policy.snr_hi_db = 30        # reported range: 30 dB

# --- loss ---
loss.variant = tlccos+tlccc  # one of tl, tlcos, tlccc, tlccos, tlcos+tl, tlccos+tlccc
loss.alpha = 0.55            # reported margins: 0.9 (tl), 0.5 (tlcos), 0.55 (tlccc), 0.55 (tlccos)
loss.alpha_secondary = 0.55
loss.xi = 0.1                # reported: 0.1
loss.orientation = similarity-consistent  # or: literal

# --- training, stage 1 ---
train1.optimizer = sgd
train1.lr = 1e-2             # reported: 1e-2
train1.momentum = 0.9        # reported: 0.9
train1.weight_decay = 4e-4   # reported: 4e-4
train1.anchor_s = 2          # reported: 6
train1.positive_s = 3        # reported: 8
train1.negative_s = 3        # reported: 8
train1.batch_size = 2        # reported: 8
train1.grad_accum = 2
train1.steps = 300

# --- training, stage 2 ---
train2.optimizer = adamw
train2.lr = 1e-4             # reported: 1e-4
train2.weight_decay = 2e-5   # reported: 2e-5
train2.anchor_s = 3          # reported: 8
train2.positive_s = 4        # reported: 12
train2.negative_s = 4        # reported: 12
train2.batch_size = 2        # reported: 8 with accumulation 8 (effective 64)
train2.grad_accum = 2
train2.steps = 200

# --- evaluation ---
eval.contamination = 0,0.3,0.5,0.7
eval.n_trials = 200
eval.repeats = 3             # reported: each set constructed 3 times
eval.enroll_s = 2.0
eval.speech_budget_s = 2.5
eval.energy_threshold_db = 10
eval.pvad_threshold = 0.5
eval.min_dcf_p_target = 0.01 # reported: P_target = 0.01, C_FA = C_Miss = 1

# --- pvad baseline training ---
pvad.steps = 600
pvad.lr = 3e-3
)";
}

}  // namespace svvad
