#include "flowtwin/nn/optim.hpp"

#include <cmath>

namespace flowtwin::nn {

void AdamOptimizer::step(ParamStore& params, const std::map<std::string, Tensor>& grads) {
  const double lr = schedule_.at(step_);
  last_lr_ = lr;
  const int64_t t = step_ + 1;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw std::invalid_argument("missing gradient for " + name);
    const Tensor& g = git->second;
    if (!g.same_shape(p)) throw std::invalid_argument("gradient shape mismatch for " + name);
    if (!g.all_finite()) throw TrainingDivergence("non-finite gradient for " + name);
    auto [mit, inserted_m] = m_.try_emplace(name, Tensor(p.rows(), p.cols()));
    auto [vit, inserted_v] = v_.try_emplace(name, Tensor(p.rows(), p.cols()));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = beta1_ * m.data()[i] + (1.0 - beta1_) * gi;
      v.data()[i] = beta2_ * v.data()[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m.data()[i] / bc1;
      const double vhat = v.data()[i] / bc2;
      p.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
  ++step_;
}

}  // namespace flowtwin::nn
