#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "svvad/tensor.hpp"

namespace svvad {

// Serializable named tensor; the unit the checkpoint format stores.
struct TensorBlob {
  std::string name;
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update from the accumulated gradients.
  virtual void step(ParameterStore& params) = 0;
  virtual std::vector<TensorBlob> state_blobs(const ParameterStore& params) const = 0;
  virtual void load_state(const std::vector<TensorBlob>& blobs) = 0;
  virtual std::string name() const = 0;
};

// SGD with momentum; weight decay is coupled (plain L2 added to the
// gradient).
class SgdOptimizer : public Optimizer {
 public:
  SgdOptimizer(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), wd_(weight_decay) {}
  void step(ParameterStore& params) override;
  std::vector<TensorBlob> state_blobs(const ParameterStore& params) const override;
  void load_state(const std::vector<TensorBlob>& blobs) override;
  std::string name() const override { return "sgd"; }

 private:
  double lr_, momentum_, wd_;
  std::map<std::string, std::vector<double>> velocity_;
};

// AdamW with decoupled weight decay.
class AdamWOptimizer : public Optimizer {
 public:
  AdamWOptimizer(double lr, double weight_decay, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterStore& params) override;
  std::vector<TensorBlob> state_blobs(const ParameterStore& params) const override;
  void load_state(const std::vector<TensorBlob>& blobs) override;
  std::string name() const override { return "adamw"; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  uint64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace svvad
