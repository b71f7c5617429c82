#include "svvad/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace svvad {

namespace {

const std::vector<double>& grad_of(const Parameter& p) {
  if (!p.tensor.has_grad())
    throw std::logic_error("svvad: optimizer step before backward for " +
                           p.name);
  return p.tensor.grad();
}

}  // namespace

void SgdOptimizer::step(ParameterStore& params) {
  for (const Parameter& p : params.parameters()) {
    const auto& g = grad_of(p);
    auto& vel = velocity_[p.name];
    if (vel.size() != g.size()) vel.assign(g.size(), 0.0);
    Tensor t = p.tensor;
    auto& w = t.mutable_values();
    for (size_t i = 0; i < w.size(); ++i) {
      const double grad = g[i] + wd_ * w[i];
      vel[i] = momentum_ * vel[i] + grad;
      w[i] -= lr_ * vel[i];
    }
  }
}

std::vector<TensorBlob> SgdOptimizer::state_blobs(
    const ParameterStore& params) const {
  std::vector<TensorBlob> blobs;
  for (const Parameter& p : params.parameters()) {
    auto it = velocity_.find(p.name);
    TensorBlob b;
    b.name = "optim/sgd/v/" + p.name;
    b.rows = p.tensor.rows();
    b.cols = p.tensor.cols();
    b.values = it != velocity_.end() ? it->second
                                     : std::vector<double>(p.tensor.size(), 0.0);
    blobs.push_back(std::move(b));
  }
  return blobs;
}

void SgdOptimizer::load_state(const std::vector<TensorBlob>& blobs) {
  const std::string prefix = "optim/sgd/v/";
  for (const TensorBlob& b : blobs)
    if (b.name.rfind(prefix, 0) == 0)
      velocity_[b.name.substr(prefix.size())] = b.values;
}

void AdamWOptimizer::step(ParameterStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Parameter& p : params.parameters()) {
    const auto& g = grad_of(p);
    auto& m = m_[p.name];
    auto& v = v_[p.name];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    Tensor t = p.tensor;
    auto& w = t.mutable_values();
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * w[i]);
    }
  }
}

std::vector<TensorBlob> AdamWOptimizer::state_blobs(
    const ParameterStore& params) const {
  std::vector<TensorBlob> blobs;
  for (const Parameter& p : params.parameters()) {
    for (const char* slot : {"m", "v"}) {
      const auto& bank = slot[0] == 'm' ? m_ : v_;
      auto it = bank.find(p.name);
      TensorBlob b;
      b.name = std::string("optim/adamw/") + slot + "/" + p.name;
      b.rows = p.tensor.rows();
      b.cols = p.tensor.cols();
      b.values = it != bank.end() ? it->second
                                  : std::vector<double>(p.tensor.size(), 0.0);
      blobs.push_back(std::move(b));
    }
  }
  TensorBlob t;
  t.name = "optim/adamw/t";
  t.rows = 1;
  t.cols = 1;
  t.values = {static_cast<double>(t_)};
  blobs.push_back(std::move(t));
  return blobs;
}

void AdamWOptimizer::load_state(const std::vector<TensorBlob>& blobs) {
  for (const TensorBlob& b : blobs) {
    if (b.name == "optim/adamw/t") {
      t_ = static_cast<uint64_t>(b.values.at(0));
    } else if (b.name.rfind("optim/adamw/m/", 0) == 0) {
      m_[b.name.substr(14)] = b.values;
    } else if (b.name.rfind("optim/adamw/v/", 0) == 0) {
      v_[b.name.substr(14)] = b.values;
    }
  }
}

}  // namespace svvad
