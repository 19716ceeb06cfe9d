#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "flowtwin/nn/gru.hpp"
#include "flowtwin/nn/tensor.hpp"

namespace flowtwin::nn {

struct TrainingDivergence : NumericError {
  using NumericError::NumericError;
};

/// Triangular cyclic schedule: base -> max over the first half of a cycle,
/// back to base over the second half.
struct CyclicLr {
  double base_lr = 1e-4;
  double max_lr = 1e-3;
  int64_t cycle_length = 1000;

  double at(int64_t step) const {
    int64_t x = step % cycle_length;
    double half = static_cast<double>(cycle_length) / 2.0;
    double frac = x <= half ? static_cast<double>(x) / half
                            : 2.0 - static_cast<double>(x) / half;
    return base_lr + (max_lr - base_lr) * frac;
  }
};

/// Adam with bias correction and the cyclic schedule above. Moment buffers
/// are keyed like the parameters they track.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(CyclicLr schedule, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8)
      : schedule_(schedule), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  /// Applies one update; `grads` must cover every parameter in the store.
  /// Throws TrainingDivergence on non-finite gradients.
  void step(ParamStore& params, const std::map<std::string, Tensor>& grads);

  int64_t step_count() const { return step_; }
  double last_lr() const { return last_lr_; }

 private:
  CyclicLr schedule_;
  double beta1_, beta2_, eps_;
  std::map<std::string, Tensor> m_, v_;
  int64_t step_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace flowtwin::nn
